//! Compact tree-shape notation.
//!
//! A structure is a comma-separated list of items. A number `n` is a folder
//! holding `n` files; a parenthesised list is a folder holding those items.
//! `;` separates structures. `10,(5,5),10` is three top-level folders, the
//! middle one holding two five-file folders.

use std::fmt;

use treevault::key_tree::Listing;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeItem {
    Folder(u32),
    Nested(Vec<ShapeItem>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub items: Vec<ShapeItem>,
}

impl Shape {
    pub fn parse(spec: &str) -> Result<Shape> {
        let mut p = Parser { chars: spec.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0 };
        let items = p.list()?;
        if p.pos != p.chars.len() {
            return Err(invalid(format!("unexpected '{}' in shape {spec:?}", p.chars[p.pos])));
        }
        Ok(Shape { items })
    }

    /// Parses `;`-separated structures.
    pub fn parse_many(spec: &str) -> Result<Vec<Shape>> {
        spec.split(';').map(Shape::parse).collect()
    }

    pub fn file_count(&self) -> usize {
        fn count(items: &[ShapeItem]) -> usize {
            items
                .iter()
                .map(|i| match i {
                    ShapeItem::Folder(n) => *n as usize,
                    ShapeItem::Nested(v) => count(v),
                })
                .sum()
        }
        count(&self.items)
    }

    /// Builds a listing; `name(k)` names the k-th file in depth-first order.
    pub fn to_listing(&self, name: &mut dyn FnMut(usize) -> String) -> Vec<Listing> {
        fn build(
            items: &[ShapeItem],
            next: &mut usize,
            folders: &mut usize,
            name: &mut dyn FnMut(usize) -> String,
        ) -> Vec<Listing> {
            items
                .iter()
                .map(|i| {
                    *folders += 1;
                    let folder = format!("d{folders}");
                    match i {
                        ShapeItem::Folder(n) => {
                            let files = (0..*n)
                                .map(|_| {
                                    *next += 1;
                                    Listing::file(name(*next - 1))
                                })
                                .collect();
                            Listing::folder(folder, files)
                        }
                        ShapeItem::Nested(v) => Listing::folder(folder, build(v, next, folders, name)),
                    }
                })
                .collect()
        }
        build(&self.items, &mut 0, &mut 0, name)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write(items: &[ShapeItem], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match it {
                    ShapeItem::Folder(n) => write!(f, "{n}")?,
                    ShapeItem::Nested(v) => {
                        f.write_str("(")?;
                        write(v, f)?;
                        f.write_str(")")?;
                    }
                }
            }
            Ok(())
        }
        write(&self.items, f)
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn list(&mut self) -> Result<Vec<ShapeItem>> {
        let mut items = vec![self.item()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<ShapeItem> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.list()?;
                if self.peek() != Some(')') {
                    return Err(invalid("unclosed '(' in shape"));
                }
                self.pos += 1;
                Ok(ShapeItem::Nested(inner))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                digits.parse().map(ShapeItem::Folder).map_err(|_| invalid(format!("folder size {digits} out of range")))
            }
            Some(c) => Err(invalid(format!("unexpected '{c}' in shape"))),
            None => Err(invalid("shape ends early")),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_shapes() {
        let s = Shape::parse("3, (2,4) ,5").unwrap();
        assert_eq!(
            s.items,
            vec![
                ShapeItem::Folder(3),
                ShapeItem::Nested(vec![ShapeItem::Folder(2), ShapeItem::Folder(4)]),
                ShapeItem::Folder(5)
            ]
        );
        assert_eq!(s.file_count(), 14);
        assert_eq!(s.to_string(), "3,(2,4),5");
        assert_eq!(Shape::parse_many("10;(5,5)").unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_shapes() {
        for bad in ["", "3,", "(2", "2)", "a", "3;;4", "99999999999"] {
            assert!(Shape::parse_many(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn listing_numbers_files_depth_first() {
        let l = Shape::parse("2,(1)").unwrap().to_listing(&mut |k| format!("f{k}"));
        let t = treevault::key_tree::build_index(&l).unwrap();
        let names: Vec<_> = t.iter().filter(|n| n.is_file()).map(|n| n.name.clone().unwrap()).collect();
        assert_eq!(names, ["f0", "f1", "f2"]);
    }
}

//! Minimal element tree on top of `quick-xml`, carrying source line numbers so
//! the file readers can point at the offending element.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct XmlError {
    pub line: usize,
    pub message: String,
}

impl XmlError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        XmlError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
    pub line: usize,
}

impl Element {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn req(&self, key: &str) -> Result<&str, XmlError> {
        self.attr(key).ok_or_else(|| {
            XmlError::new(
                self.line,
                format!("<{}> is missing attribute '{}'", self.name, key),
            )
        })
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, XmlError> {
        let raw = self.req(key)?;
        raw.trim().parse::<f64>().map_err(|_| {
            XmlError::new(
                self.line,
                format!("<{}> attribute '{}' is not a number: {raw:?}", self.name, key),
            )
        })
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, XmlError> {
        match self.attr(key) {
            None => Ok(None),
            Some(_) => self.req_f64(key).map(Some),
        }
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }
}

fn line_at(src: &str, offset: usize) -> usize {
    let end = offset.min(src.len());
    src.as_bytes()[..end].iter().filter(|b| **b == b'\n').count() + 1
}

fn open(src: &str, start: &BytesStart, offset: usize) -> Result<Element, XmlError> {
    let line = line_at(src, offset);
    let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| XmlError::new(line, e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| XmlError::new(line, e.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        children: Vec::new(),
        text: String::new(),
        line,
    })
}

/// Parses a whole document and returns its root element.
pub fn parse(src: &str) -> Result<Element, XmlError> {
    let mut reader = Reader::from_str(src);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| XmlError::new(line_at(src, reader.error_position() as usize), e.to_string()))?;
        match event {
            Event::Start(start) => stack.push(open(src, &start, offset)?),
            Event::Empty(start) => {
                let el = open(src, &start, offset)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(XmlError::new(el.line, "more than one root element")),
                }
            }
            Event::End(_) => {
                let el = stack
                    .pop()
                    .ok_or_else(|| XmlError::new(line_at(src, offset), "unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(XmlError::new(el.line, "more than one root element")),
                }
            }
            Event::Text(text) => {
                if let Some(top) = stack.last_mut() {
                    let t = text
                        .unescape()
                        .map_err(|e| XmlError::new(line_at(src, offset), e.to_string()))?;
                    top.text.push_str(&t);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(XmlError::new(open.line, format!("unclosed element <{}>", open.name)));
    }
    root.ok_or_else(|| XmlError::new(1, "document has no root element"))
}

pub fn escape(raw: &str) -> String {
    quick_xml::escape::escape(raw).into_owned()
}

/// Renders `<name k="v" .../>` with escaped attribute values.
pub fn empty_tag(out: &mut String, indent: usize, name: &str, attrs: &[(&str, String)]) {
    open_tag_inner(out, indent, name, attrs);
    out.push_str("/>\n");
}

pub fn open_tag(out: &mut String, indent: usize, name: &str, attrs: &[(&str, String)]) {
    open_tag_inner(out, indent, name, attrs);
    out.push_str(">\n");
}

pub fn close_tag(out: &mut String, indent: usize, name: &str) {
    let _ = writeln!(out, "{:indent$}</{name}>", "", indent = indent * 2);
}

fn open_tag_inner(out: &mut String, indent: usize, name: &str, attrs: &[(&str, String)]) {
    let _ = write!(out, "{:indent$}<{name}", "", indent = indent * 2);
    for (k, v) in attrs {
        let _ = write!(out, " {k}=\"{}\"", escape(v));
    }
}

pub const HEADER: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

//! Parser for the Thrift IDL subset.
//!
//! Supported: `namespace`, `typedef`, simple `const`, `enum`, `struct`,
//! `exception`, `service` with `throws` clauses, base types, containers,
//! field ids and requiredness qualifiers. Constraints are written as
//! `@name(args)` annotations inside comments next to a field or parameter.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Number, Value};

use super::{
    validate_schema, FunctionSpec, InterfaceSchema, ParamSpec, RpcSchema, SchemaError, Severity,
    SupportedDataType as K, TypeSpec,
};

/// Parses Thrift IDL text into a validated schema.
pub fn parse_thrift_idl(source: &str) -> Result<RpcSchema, SchemaError> {
    let tokens = Lexer::new(source).tokenize()?;
    let doc = Parser { tokens, pos: 0 }.document()?;
    let schema = doc.into_schema()?;
    let errors: Vec<_> = validate_schema(&schema)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(schema)
    } else {
        Err(SchemaError::Validation(errors))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
struct Annotation {
    name: String,
    args: Vec<AnnArg>,
}

#[derive(Debug, Clone, PartialEq)]
struct AnnArg {
    key: Option<String>,
    value: Value,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    /// Annotations from comments that precede this token, with their line.
    leading: Vec<(usize, Annotation)>,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn syntax(&self, line: usize, col: usize, msg: impl Into<String>) -> SchemaError {
        SchemaError::Syntax {
            line,
            column: col,
            message: msg.into(),
        }
    }

    fn tokenize(mut self) -> Result<Vec<Token>, SchemaError> {
        let mut out = Vec::new();
        let mut pending: Vec<(usize, Annotation)> = Vec::new();
        loop {
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line: self.line,
                    col: self.col,
                    leading: pending,
                });
                return Ok(out);
            };
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '#' {
                let text = self.line_comment();
                pending.extend(parse_annotations(&text, line, col)?.into_iter().map(|a| (line, a)));
                continue;
            }
            if c == '/' {
                self.bump();
                match self.chars.peek() {
                    Some('/') => {
                        let text = self.line_comment();
                        pending.extend(
                            parse_annotations(&text, line, col)?
                                .into_iter()
                                .map(|a| (line, a)),
                        );
                    }
                    Some('*') => {
                        self.bump();
                        let text = self.block_comment(line, col)?;
                        pending.extend(
                            parse_annotations(&text, line, col)?
                                .into_iter()
                                .map(|a| (line, a)),
                        );
                    }
                    _ => return Err(self.syntax(line, col, "unexpected '/'")),
                }
                continue;
            }
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() || c == '-' || c == '+' {
                self.number(line, col)?
            } else if c == '"' || c == '\'' {
                self.bump();
                Tok::Str(self.string_lit(c, line, col)?)
            } else if "{}()<>,;:=[]".contains(c) {
                self.bump();
                Tok::Sym(c)
            } else {
                return Err(self.syntax(line, col, format!("unexpected character '{c}'")));
            };
            out.push(Token {
                tok,
                line,
                col,
                leading: std::mem::take(&mut pending),
            });
        }
    }

    fn line_comment(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c == '\n' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn block_comment(&mut self, line: usize, col: usize) -> Result<String, SchemaError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.syntax(line, col, "unterminated block comment")),
                Some('*') if self.chars.peek() == Some(&'/') => {
                    self.bump();
                    return Ok(s);
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self, line: usize, col: usize) -> Result<Tok, SchemaError> {
        let mut s = String::new();
        if let Some(&c) = self.chars.peek() {
            if c == '-' || c == '+' {
                s.push(c);
                self.bump();
            }
        }
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '.' || ((c == '-' || c == '+') && s.ends_with(['e', 'E'])) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if let Some(hex) = s.strip_prefix("0x") {
            return i64::from_str_radix(hex, 16)
                .map(Tok::Int)
                .map_err(|_| self.syntax(line, col, format!("invalid number '{s}'")));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Tok::Int(i));
        }
        s.parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .map(Tok::Float)
            .ok_or_else(|| self.syntax(line, col, format!("invalid number '{s}'")))
    }

    fn string_lit(&mut self, quote: char, line: usize, col: usize) -> Result<String, SchemaError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.syntax(line, col, "unterminated string literal")),
                Some('\\') => match self.bump() {
                    Some(c) if c == quote || c == '\\' => s.push(c),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => {
                        s.push('\\');
                        s.push(c);
                    }
                    None => return Err(self.syntax(line, col, "unterminated string literal")),
                },
                Some(c) if c == quote => return Ok(s),
                Some(c) => s.push(c),
            }
        }
    }
}

/// Extracts `@name(args)` annotations from comment text. Unknown names
/// (doc tags such as `@param`) are kept and ignored later.
fn parse_annotations(text: &str, line: usize, col: usize) -> Result<Vec<Annotation>, SchemaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let at_boundary = i == 0 || !chars[i - 1].is_alphanumeric();
        if chars[i] != '@' || !at_boundary {
            i += 1;
            continue;
        }
        i += 1;
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        let name: String = chars[start..i].iter().collect();
        if name.is_empty() {
            continue;
        }
        let mut args = Vec::new();
        if i < chars.len() && chars[i] == '(' {
            i += 1;
            loop {
                while i < chars.len() && chars[i].is_whitespace() {
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(SchemaError::Syntax {
                        line,
                        column: col,
                        message: format!("unterminated annotation @{name}"),
                    });
                }
                if chars[i] == ')' {
                    i += 1;
                    break;
                }
                if chars[i] == ',' {
                    i += 1;
                    continue;
                }
                let (arg, next) = annotation_arg(&chars, i).ok_or_else(|| SchemaError::Syntax {
                    line,
                    column: col,
                    message: format!("malformed argument in annotation @{name}"),
                })?;
                args.push(arg);
                i = next;
            }
        }
        out.push(Annotation { name, args });
    }
    Ok(out)
}

fn annotation_arg(chars: &[char], mut i: usize) -> Option<(AnnArg, usize)> {
    let mut key = None;
    // optional `key =`
    let mut j = i;
    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
        j += 1;
    }
    if j > i && chars[i].is_ascii_alphabetic() {
        let mut k = j;
        while k < chars.len() && chars[k].is_whitespace() {
            k += 1;
        }
        if k < chars.len() && chars[k] == '=' {
            key = Some(chars[i..j].iter().collect::<String>());
            i = k + 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
        }
    }
    if i >= chars.len() {
        return None;
    }
    if chars[i] == '"' {
        let mut s = String::new();
        let mut k = i + 1;
        while k < chars.len() {
            match chars[k] {
                '\\' if k + 1 < chars.len() && chars[k + 1] == '"' => {
                    s.push('"');
                    k += 2;
                }
                '"' => return Some((AnnArg { key, value: Value::String(s) }, k + 1)),
                c => {
                    s.push(c);
                    k += 1;
                }
            }
        }
        return None;
    }
    let mut k = i;
    while k < chars.len() && chars[k] != ',' && chars[k] != ')' {
        k += 1;
    }
    let raw: String = chars[i..k].iter().collect::<String>().trim().to_string();
    let value = match raw.as_str() {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => parse_number(&raw).map(Value::Number).unwrap_or(Value::String(raw)),
    };
    Some((AnnArg { key, value }, k))
}

fn parse_number(raw: &str) -> Option<Number> {
    if let Ok(i) = raw.parse::<i64>() {
        return Some(Number::from(i));
    }
    raw.parse::<f64>().ok().and_then(Number::from_f64)
}

#[derive(Debug, Clone)]
enum TypeExpr {
    Base(K, &'static str),
    Named(String, usize, usize),
    List(Box<TypeExpr>),
    Set(Box<TypeExpr>),
    Map(Box<TypeExpr>, Box<TypeExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Requiredness {
    Default,
    Required,
    Optional,
}

#[derive(Debug, Clone)]
struct RawField {
    name: String,
    ty: TypeExpr,
    req: Requiredness,
    default: Option<Value>,
    annotations: Vec<Annotation>,
}

#[derive(Debug, Clone)]
struct RawFunction {
    name: String,
    ret: Option<TypeExpr>,
    params: Vec<RawField>,
    throws: Vec<RawField>,
    annotations: Vec<Annotation>,
}

#[derive(Debug, Default)]
struct Document {
    typedefs: BTreeMap<String, TypeExpr>,
    structs: Vec<(String, Vec<RawField>)>,
    enums: Vec<(String, Vec<String>)>,
    services: Vec<(String, Vec<RawFunction>)>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> SchemaError {
        let (line, column) = self.here();
        SchemaError::Syntax {
            line,
            column,
            message: msg.into(),
        }
    }

    fn unsupported(&self, what: impl Into<String>) -> SchemaError {
        let (line, column) = self.here();
        SchemaError::UnsupportedConstruct {
            line,
            column,
            construct: what.into(),
        }
    }

    fn is_sym(&self, c: char) -> bool {
        *self.peek() == Tok::Sym(c)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SchemaError> {
        if self.is_sym(c) {
            self.advance();
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}', found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, SchemaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.err(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn skip_separator(&mut self) {
        if self.is_sym(',') || self.is_sym(';') {
            self.advance();
        }
    }

    /// Annotations attached to tokens `start..self.pos`, plus annotations
    /// trailing on the same line as the last consumed token.
    fn take_annotations(&mut self, start: usize) -> Vec<Annotation> {
        let mut out = Vec::new();
        for t in &mut self.tokens[start..self.pos] {
            out.extend(t.leading.drain(..).map(|(_, a)| a));
        }
        if self.pos > start {
            let last_line = self.tokens[self.pos - 1].line;
            let next = &mut self.tokens[self.pos];
            let (same, rest): (Vec<_>, Vec<_>) =
                next.leading.drain(..).partition(|(line, _)| *line == last_line);
            next.leading = rest;
            out.extend(same.into_iter().map(|(_, a)| a));
        }
        out
    }

    fn document(mut self) -> Result<Document, SchemaError> {
        let mut doc = Document::default();
        loop {
            let kw = match self.peek().clone() {
                Tok::Eof => return Ok(doc),
                Tok::Ident(s) => s,
                other => return Err(self.err(format!("expected definition, found {}", describe(&other)))),
            };
            match kw.as_str() {
                "namespace" => {
                    self.advance();
                    self.ident()?;
                    self.ident()?;
                }
                "include" | "cpp_include" => return Err(self.unsupported(format!("{kw} directive"))),
                "union" => return Err(self.unsupported("union")),
                "senum" => return Err(self.unsupported("senum")),
                "const" => {
                    self.advance();
                    self.field_type()?;
                    self.ident()?;
                    self.expect_sym('=')?;
                    if self.is_sym('[') || self.is_sym('{') {
                        return Err(self.unsupported("constant with complex expression"));
                    }
                    self.const_value()?;
                    self.skip_separator();
                }
                "typedef" => {
                    self.advance();
                    let ty = self.field_type()?;
                    let name = self.ident()?;
                    self.skip_separator();
                    doc.typedefs.insert(name, ty);
                }
                "enum" => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect_sym('{')?;
                    let mut items = Vec::new();
                    while !self.is_sym('}') {
                        items.push(self.ident()?);
                        if self.is_sym('=') {
                            self.advance();
                            match self.advance() {
                                Tok::Int(_) => {}
                                other => return Err(self.err(format!("expected enum value, found {}", describe(&other)))),
                            }
                        }
                        self.skip_separator();
                    }
                    self.advance();
                    doc.enums.push((name, items));
                }
                "struct" | "exception" => {
                    self.advance();
                    let name = self.ident()?;
                    if self.is_kw("xsd_all") {
                        self.advance();
                    }
                    self.expect_sym('{')?;
                    let mut fields = Vec::new();
                    while !self.is_sym('}') {
                        fields.push(self.field()?);
                    }
                    self.advance();
                    doc.structs.push((name, fields));
                }
                "service" => {
                    self.advance();
                    let name = self.ident()?;
                    if self.is_kw("extends") {
                        return Err(self.unsupported("service inheritance"));
                    }
                    self.expect_sym('{')?;
                    let mut functions = Vec::new();
                    while !self.is_sym('}') {
                        functions.push(self.function()?);
                    }
                    self.advance();
                    doc.services.push((name, functions));
                }
                other => return Err(self.err(format!("unknown definition '{other}'"))),
            }
        }
    }

    fn field(&mut self) -> Result<RawField, SchemaError> {
        let start = self.pos;
        if let Tok::Int(_) = self.peek() {
            self.advance();
            self.expect_sym(':')?;
        }
        let req = if self.is_kw("required") {
            self.advance();
            Requiredness::Required
        } else if self.is_kw("optional") {
            self.advance();
            Requiredness::Optional
        } else {
            Requiredness::Default
        };
        let ty = self.field_type()?;
        let name = self.ident()?;
        let default = if self.is_sym('=') {
            self.advance();
            if self.is_sym('[') || self.is_sym('{') {
                return Err(self.unsupported("default value with complex expression"));
            }
            Some(self.const_value()?)
        } else {
            None
        };
        if self.is_sym('(') {
            return Err(self.unsupported("thrift field annotations"));
        }
        self.skip_separator();
        let annotations = self.take_annotations(start);
        Ok(RawField {
            name,
            ty,
            req,
            default,
            annotations,
        })
    }

    fn function(&mut self) -> Result<RawFunction, SchemaError> {
        let start = self.pos;
        if self.is_kw("oneway") {
            self.advance();
        }
        let ret = if self.is_kw("void") {
            self.advance();
            None
        } else {
            Some(self.field_type()?)
        };
        let name = self.ident()?;
        let mut annotations: Vec<Annotation> = Vec::new();
        for t in &mut self.tokens[start..self.pos] {
            annotations.extend(t.leading.drain(..).map(|(_, a)| a));
        }
        self.expect_sym('(')?;
        let mut params = Vec::new();
        while !self.is_sym(')') {
            params.push(self.field()?);
        }
        self.advance();
        let mut throws = Vec::new();
        if self.is_kw("throws") {
            self.advance();
            self.expect_sym('(')?;
            while !self.is_sym(')') {
                throws.push(self.field()?);
            }
            self.advance();
        }
        if self.is_sym('(') {
            return Err(self.unsupported("thrift function annotations"));
        }
        self.skip_separator();
        Ok(RawFunction {
            name,
            ret,
            params,
            throws,
            annotations,
        })
    }

    fn field_type(&mut self) -> Result<TypeExpr, SchemaError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        let base = |k, n| Ok(TypeExpr::Base(k, n));
        match name.as_str() {
            "bool" => base(K::Boolean, "boolean"),
            "byte" | "i8" => base(K::Byte, "byte"),
            "i16" => base(K::Short, "short"),
            "i32" => base(K::Int, "int"),
            "i64" => base(K::Long, "long"),
            "double" => base(K::Double, "double"),
            "string" => base(K::String, "String"),
            "binary" => base(K::ByteBuffer, "ByteBuffer"),
            "list" | "set" => {
                self.expect_sym('<')?;
                let inner = Box::new(self.field_type()?);
                self.expect_sym('>')?;
                Ok(if name == "list" {
                    TypeExpr::List(inner)
                } else {
                    TypeExpr::Set(inner)
                })
            }
            "map" => {
                self.expect_sym('<')?;
                let k = Box::new(self.field_type()?);
                self.expect_sym(',')?;
                let v = Box::new(self.field_type()?);
                self.expect_sym('>')?;
                Ok(TypeExpr::Map(k, v))
            }
            "slist" | "senum" => Err(SchemaError::UnsupportedConstruct {
                line,
                column: col,
                construct: format!("deprecated type {name}"),
            }),
            _ => Ok(TypeExpr::Named(name, line, col)),
        }
    }

    fn const_value(&mut self) -> Result<Value, SchemaError> {
        match self.advance() {
            Tok::Int(i) => Ok(Value::from(i)),
            Tok::Float(f) => Ok(Number::from_f64(f).map(Value::Number).unwrap_or(Value::Null)),
            Tok::Str(s) => Ok(Value::String(s)),
            Tok::Ident(s) if s == "true" => Ok(Value::Bool(true)),
            Tok::Ident(s) if s == "false" => Ok(Value::Bool(false)),
            Tok::Ident(s) => Ok(Value::String(s.rsplit('.').next().unwrap_or(&s).to_string())),
            other => Err(self.err(format!("expected constant, found {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Int(i) => format!("'{i}'"),
        Tok::Float(f) => format!("'{f}'"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn boxed_name(primitive: &str) -> &str {
    match primitive {
        "int" => "Integer",
        "long" => "Long",
        "double" => "Double",
        "float" => "Float",
        "boolean" => "Boolean",
        "byte" => "Byte",
        "short" => "Short",
        "char" => "Character",
        other => other,
    }
}

impl Document {
    fn resolve(&self, ty: &TypeExpr, depth: usize) -> Result<TypeSpec, SchemaError> {
        Ok(match ty {
            TypeExpr::Base(k, n) => TypeSpec::simple(*k, *n),
            TypeExpr::List(e) => TypeSpec::sequence(K::List, self.boxed(e, depth)?),
            TypeExpr::Set(e) => TypeSpec::sequence(K::Set, self.boxed(e, depth)?),
            TypeExpr::Map(k, v) => TypeSpec::map(self.boxed(k, depth)?, self.boxed(v, depth)?),
            TypeExpr::Named(name, line, col) => {
                if let Some(alias) = self.typedefs.get(name) {
                    if depth > 32 {
                        return Err(SchemaError::Syntax {
                            line: *line,
                            column: *col,
                            message: format!("typedef cycle through '{name}'"),
                        });
                    }
                    return self.resolve(alias, depth + 1);
                }
                let kind = if self.enums.iter().any(|(n, _)| n == name) {
                    K::Enum
                } else {
                    K::CustomObject
                };
                TypeSpec::simple(kind, name.clone())
            }
        })
    }

    /// Container elements are always reference types.
    fn boxed(&self, ty: &TypeExpr, depth: usize) -> Result<TypeSpec, SchemaError> {
        let mut t = self.resolve(ty, depth)?;
        t.type_name = boxed_name(&t.type_name).to_string();
        Ok(t)
    }

    fn param(&self, f: &RawField) -> Result<ParamSpec, SchemaError> {
        let mut type_spec = self.resolve(&f.ty, 0)?;
        let nullable = match f.req {
            Requiredness::Required => false,
            Requiredness::Optional => true,
            Requiredness::Default => !type_spec.is_primitive(),
        };
        if nullable && type_spec.is_primitive() {
            type_spec.type_name = boxed_name(&type_spec.type_name).to_string();
        }
        let mut p = ParamSpec::new(f.name.clone(), type_spec);
        p.is_nullable = nullable;
        p.default_value = f.default.clone();
        for a in &f.annotations {
            apply_annotation(&mut p, a);
        }
        Ok(p)
    }

    fn into_schema(self) -> Result<RpcSchema, SchemaError> {
        let mut type_defs = BTreeMap::new();
        for (name, items) in &self.enums {
            let mut t = TypeSpec::simple(K::Enum, name.clone());
            t.enum_items = items.clone();
            type_defs.insert(name.clone(), t);
        }
        for (name, fields) in &self.structs {
            let mut t = TypeSpec::simple(K::CustomObject, name.clone());
            t.fields = fields.iter().map(|f| self.param(f)).collect::<Result<_, _>>()?;
            type_defs.insert(name.clone(), t);
        }
        let mut interfaces = Vec::new();
        for (service, raw_functions) in &self.services {
            let mut functions = Vec::new();
            for rf in raw_functions {
                let request_params = rf
                    .params
                    .iter()
                    .map(|p| self.param(p))
                    .collect::<Result<Vec<_>, _>>()?;
                let response_type = rf.ret.as_ref().map(|t| self.resolve(t, 0)).transpose()?;
                let declared_exceptions = rf
                    .throws
                    .iter()
                    .map(|t| self.resolve(&t.ty, 0).map(|s| s.type_name))
                    .collect::<Result<Vec<_>, _>>()?;
                let is_authorized = rf
                    .annotations
                    .iter()
                    .any(|a| a.name.eq_ignore_ascii_case("authorized"));
                functions.push(FunctionSpec {
                    interface_id: service.clone(),
                    action_name: rf.name.clone(),
                    request_params,
                    response_type,
                    declared_exceptions,
                    is_authorized,
                    auth_setup: None,
                });
            }
            let types = employed_types(&functions, &type_defs);
            interfaces.push(InterfaceSchema {
                interface_id: service.clone(),
                functions,
                auth_functions: Vec::new(),
                types,
            });
        }
        Ok(RpcSchema {
            interfaces,
            type_defs,
        })
    }
}

fn employed_types(functions: &[FunctionSpec], defs: &BTreeMap<String, TypeSpec>) -> Vec<TypeSpec> {
    fn visit(t: &TypeSpec, defs: &BTreeMap<String, TypeSpec>, seen: &mut BTreeSet<String>) {
        if t.kind.is_named() && seen.insert(t.type_name.clone()) {
            if let Some(def) = defs.get(&t.type_name) {
                for f in &def.fields {
                    visit(&f.type_spec, defs, seen);
                }
            }
        }
        for inner in [&t.example, &t.key_type, &t.value_type].into_iter().flatten() {
            visit(inner, defs, seen);
        }
    }
    let mut seen = BTreeSet::new();
    for f in functions {
        for p in &f.request_params {
            visit(&p.type_spec, defs, &mut seen);
        }
        if let Some(r) = &f.response_type {
            visit(r, defs, &mut seen);
        }
        for e in &f.declared_exceptions {
            if defs.contains_key(e) {
                seen.insert(e.clone());
            }
        }
    }
    seen.into_iter()
        .map(|name| match defs.get(&name) {
            Some(def) => def.as_reference(),
            None => TypeSpec::simple(K::CustomObject, name),
        })
        .collect()
}

fn arg(a: &Annotation, idx: usize, key: &str) -> Option<Value> {
    a.args
        .iter()
        .find(|x| x.key.as_deref() == Some(key))
        .or_else(|| a.args.iter().filter(|x| x.key.is_none()).nth(idx))
        .map(|x| x.value.clone())
}

fn as_number(v: Value) -> Option<Number> {
    match v {
        Value::Number(n) => Some(n),
        Value::String(s) => parse_number(&s),
        _ => None,
    }
}

fn as_u64(v: Value) -> Option<u64> {
    as_number(v).and_then(|n| n.as_u64())
}

fn apply_annotation(p: &mut ParamSpec, a: &Annotation) {
    let zero = Number::from(0);
    match a.name.to_ascii_lowercase().as_str() {
        "min" => {
            if let Some(n) = arg(a, 0, "value").and_then(as_number) {
                p.min_value = Some(n);
                p.min_inclusive = true;
            }
        }
        "max" => {
            if let Some(n) = arg(a, 0, "value").and_then(as_number) {
                p.max_value = Some(n);
                p.max_inclusive = true;
            }
        }
        "decimalmin" => {
            if let Some(n) = arg(a, 0, "value").and_then(as_number) {
                p.min_value = Some(n);
                p.min_inclusive = arg(a, 1, "inclusive").and_then(|v| v.as_bool()).unwrap_or(true);
            }
        }
        "decimalmax" => {
            if let Some(n) = arg(a, 0, "value").and_then(as_number) {
                p.max_value = Some(n);
                p.max_inclusive = arg(a, 1, "inclusive").and_then(|v| v.as_bool()).unwrap_or(true);
            }
        }
        "digits" => {
            let integer = arg(a, 0, "integer").and_then(as_u64).unwrap_or(0) as u32;
            let fraction = arg(a, 1, "fraction").and_then(as_u64).unwrap_or(0) as u32;
            p.precision = Some(integer + fraction);
            p.scale = Some(fraction);
        }
        "negative" => {
            p.max_value = Some(zero);
            p.max_inclusive = false;
        }
        "negativeorzero" => {
            p.max_value = Some(zero);
            p.max_inclusive = true;
        }
        "positive" => {
            p.min_value = Some(zero);
            p.min_inclusive = false;
        }
        "positiveorzero" => {
            p.min_value = Some(zero);
            p.min_inclusive = true;
        }
        "notblank" | "notempty" => {
            p.is_nullable = false;
            p.min_size = Some(p.min_size.unwrap_or(0).max(1));
        }
        "notnull" => p.is_nullable = false,
        "pattern" => {
            if let Some(Value::String(re)) = arg(a, 0, "regexp") {
                p.pattern = Some(re);
            }
        }
        "size" => {
            if let Some(n) = arg(a, 0, "min").and_then(as_u64) {
                p.min_size = Some(n);
            }
            if let Some(n) = arg(a, 1, "max").and_then(as_u64) {
                p.max_size = Some(n);
            }
        }
        "asserttrue" | "assertfalse" => {
            p.default_value = Some(Value::Bool(a.name.eq_ignore_ascii_case("asserttrue")));
            p.is_mutable = false;
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_NCS: &str = "namespace java org.thrift.ncs

struct Dto {
\t1: i32 resultAsInt,
\t2: double resultAsDouble
}

service NcsService {
\t
\tDto bessj(1:i32 n, 2:double x)
}";

    #[test]
    fn parses_ncs_snippet() {
        let s = parse_thrift_idl(FIG_NCS).unwrap();
        assert_eq!(s.interfaces.len(), 1);
        let iface = &s.interfaces[0];
        assert_eq!(iface.interface_id, "NcsService");
        let f = &iface.functions[0];
        assert_eq!(f.action_name, "bessj");
        assert_eq!(f.request_params[0].kind(), K::Int);
        assert_eq!(f.request_params[1].kind(), K::Double);
        assert!(!f.request_params[0].is_nullable);
        let ret = f.response_type.as_ref().unwrap();
        assert_eq!((ret.kind, ret.type_name.as_str()), (K::CustomObject, "Dto"));
        let dto = s.resolve("Dto").unwrap();
        let names: Vec<_> = dto.fields.iter().map(|f| (f.name.as_str(), f.kind())).collect();
        assert_eq!(names, vec![("resultAsInt", K::Int), ("resultAsDouble", K::Double)]);
    }

    #[test]
    fn required_map_field() {
        let src = "struct S { 3: required map<i32,string> m }\nservice X { S get() }";
        let s = parse_thrift_idl(src).unwrap();
        let field = &s.resolve("S").unwrap().fields[0];
        let mut expected = ParamSpec::new(
            "m",
            TypeSpec::map(TypeSpec::simple(K::Int, "Integer"), TypeSpec::simple(K::String, "String")),
        );
        expected.is_nullable = false;
        assert_eq!(field, &expected);
    }

    #[test]
    fn empty_service_is_rejected() {
        match parse_thrift_idl("service S {}") {
            Err(SchemaError::Validation(d)) => assert_eq!(d.len(), 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_thrift_idl("struct A {\n  1: i32 a\n  2: i32 }\n") {
            Err(SchemaError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 10);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_constructs() {
        for src in [
            "include \"shared.thrift\"",
            "union U { 1: i32 a }",
            "const list<i32> L = [1, 2]",
            "service A extends B { void f() }",
        ] {
            assert!(
                matches!(parse_thrift_idl(src), Err(SchemaError::UnsupportedConstruct { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn annotations_attach_to_the_right_field() {
        let src = r#"
struct Day {
  // @min(1) @max(31)
  1: i32 day, // @positive
  2: string code /* @pattern("[A-Z]{3}") @size(3, 3) */
  3: optional string note
}
service Cal { void set(1: Day d, 2: i64 t /* @negativeOrZero */) }
"#;
        let s = parse_thrift_idl(src).unwrap();
        let day = s.resolve("Day").unwrap();
        let f0 = &day.fields[0];
        // the trailing @positive overrides the leading @min
        assert_eq!(f0.min_value, Some(Number::from(0)));
        assert!(!f0.min_inclusive);
        assert_eq!(f0.max_value, Some(Number::from(31)));
        let f1 = &day.fields[1];
        assert_eq!(f1.pattern.as_deref(), Some("[A-Z]{3}"));
        assert_eq!((f1.min_size, f1.max_size), (Some(3), Some(3)));
        assert!(f1.is_nullable);
        let f2 = &day.fields[2];
        assert_eq!(f2.pattern, None);
        assert!(f2.is_nullable);
        let t = &s.interfaces[0].functions[0].request_params[1];
        assert_eq!(t.max_value, Some(Number::from(0)));
        assert!(t.max_inclusive);
    }

    #[test]
    fn doc_tags_are_ignored() {
        let src = "service S {\n /** Computes it.\n  * @param n order\n  * @return value */\n i32 f(1: i32 n) }";
        let s = parse_thrift_idl(src).unwrap();
        assert_eq!(s.interfaces[0].functions[0].request_params[0].min_value, None);
    }

    #[test]
    fn optional_primitives_are_boxed_and_nullable() {
        let s = parse_thrift_idl("service S { void f(1: optional i32 a, 2: required string b) }").unwrap();
        let ps = &s.interfaces[0].functions[0].request_params;
        assert!(ps[0].is_nullable);
        assert_eq!(ps[0].type_spec.type_name, "Integer");
        assert!(!ps[1].is_nullable);
    }

    #[test]
    fn typedefs_enums_and_throws() {
        let src = r#"
typedef i64 Timestamp
enum Color { RED = 1, GREEN, BLUE }
exception NotFound { 1: string message }
service Paint {
  /* @authorized */
  Color pick(1: Timestamp at, 2: list<Color> options) throws (1: NotFound nf)
  oneway void ping()
}
"#;
        let s = parse_thrift_idl(src).unwrap();
        let f = &s.interfaces[0].functions[0];
        assert!(f.is_authorized);
        assert_eq!(f.request_params[0].kind(), K::Long);
        assert_eq!(f.request_params[1].type_spec.example.as_ref().unwrap().kind, K::Enum);
        assert_eq!(f.declared_exceptions, vec!["NotFound".to_string()]);
        assert_eq!(s.resolve("Color").unwrap().enum_items, vec!["RED", "GREEN", "BLUE"]);
        let employed: Vec<_> = s.interfaces[0].types.iter().map(|t| t.type_name.as_str()).collect();
        assert_eq!(employed, vec!["Color", "NotFound"]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(parse_thrift_idl(FIG_NCS).unwrap(), parse_thrift_idl(FIG_NCS).unwrap());
    }

    #[test]
    fn constraint_annotations_cover_standard_set() {
        let src = r#"
struct C {
  1: bool t /* @assertTrue */
  2: string nb /* @notBlank */
  3: string d /* @decimalMin("0.5", false) @decimalMax(9.5) */
  4: double g /* @digits(3, 2) */
  5: i32 neg /* @negative */
  6: list<i32> l /* @notEmpty @size(max = 4) */
  7: string nn /* @notNull */
}
service S { void f(1: C c) }
"#;
        let s = parse_thrift_idl(src).unwrap();
        let f = &s.resolve("C").unwrap().fields;
        assert!(!f[0].is_mutable);
        assert_eq!(f[0].default_value, Some(Value::Bool(true)));
        assert_eq!((f[1].is_nullable, f[1].min_size), (false, Some(1)));
        assert_eq!(f[2].min_value.as_ref().and_then(|n| n.as_f64()), Some(0.5));
        assert!(!f[2].min_inclusive);
        assert_eq!(f[2].max_value.as_ref().and_then(|n| n.as_f64()), Some(9.5));
        assert_eq!((f[3].precision, f[3].scale), (Some(5), Some(2)));
        assert!(!f[4].max_inclusive);
        assert_eq!((f[5].min_size, f[5].max_size), (Some(1), Some(4)));
        assert!(!f[6].is_nullable);
    }
}

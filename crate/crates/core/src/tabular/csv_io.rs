use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::Table;
use crate::error::{Error, Result};

/// Loads a CSV file with a mandatory header row. Cells equal to `null_token`
/// after trimming become null.
pub fn load_csv(path: impl AsRef<Path>, null_token: &str) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, null_token)
}

pub fn read_csv<R: Read>(reader: R, null_token: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Empty("file has no header row".into()));
    }
    let token = null_token.trim();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != header.len() {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        rows.push(
            record
                .iter()
                .map(|cell| (cell != token).then(|| cell.to_string()))
                .collect(),
        );
    }
    if rows.is_empty() {
        return Err(Error::Empty("file has no data rows".into()));
    }
    Table::from_label_rows(header, rows)
}

/// Writes the table with a header row; nulls become `null_token`. Extra
/// columns, if given, are appended per row.
pub fn write_csv<W: Write>(writer: W, table: &Table, null_token: &str, extra: Option<(&str, &[String])>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.schema().attributes().iter().map(String::as_str).collect();
    if let Some((name, _)) = extra {
        header.push(name);
    }
    w.write_record(&header)?;
    for (i, t) in table.tuples().iter().enumerate() {
        let mut row: Vec<&str> = (0..table.schema().arity())
            .map(|a| table.label_of(t, a).unwrap_or(null_token))
            .collect();
        if let Some((_, values)) = extra {
            row.push(&values[i]);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAGMENT: &str = "\
ID,Make,Model,Year,Body,Mileage
1,Audi,null,null,Sedan,20000
2,Audi,A8,null,Sedan,15000
3,BMW,745,2002,Sedan,40000
4,Audi,null,2005,Sedan,20000
5,Audi,A8,2005,Sedan,20000
6,BMW,645,1999,Convt,null
7,Hyundai,Santa,1990,SUV,45000
8,Hyundai,Santa,1993,null,40000
9,Acura,MDX,1990,SUV,30000
10,Acura,MDX,1990,null,12000
";

    #[test]
    fn loads_fragment_with_nulls_in_place() {
        let t = read_csv(FRAGMENT.as_bytes(), "null").unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.schema().arity(), 6);
        let s = t.schema();
        let mut nulls = Vec::new();
        for tup in t.tuples() {
            for a in tup.null_attributes() {
                nulls.push(format!("t{}.{}", tup.id, s.name(a)));
            }
        }
        assert_eq!(
            nulls,
            [
                "t1.Model",
                "t1.Year",
                "t2.Year",
                "t4.Model",
                "t6.Mileage",
                "t8.Body",
                "t10.Body"
            ]
        );
    }

    #[test]
    fn single_row_gives_singleton_domains() {
        let t = read_csv("A,B\nx,y\n".as_bytes(), "").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.schema().domain(0), ["x"]);
        assert_eq!(t.schema().domain(1), ["y"]);
    }

    #[test]
    fn all_null_column_is_an_error() {
        let err = read_csv("A,B\nx,?\ny,?\n".as_bytes(), "?").unwrap_err();
        assert!(matches!(err, Error::EmptyDomain(ref a) if a == "B"), "{err}");
        assert!(err.to_string().contains("empty domain for attribute"));
    }

    #[test]
    fn wrong_arity_names_the_line() {
        let err = read_csv("A,B\nx,y\nz\n".as_bytes(), "").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(read_csv("".as_bytes(), "").is_err());
        assert!(read_csv("A,B\n".as_bytes(), "").is_err());
    }

    #[test]
    fn default_null_token_is_empty_and_trimmed() {
        let t = read_csv("A,B\n x , \ny,z\n".as_bytes(), "").unwrap();
        assert_eq!(t.tuples()[0].cells[1], None);
        assert_eq!(t.label_of(&t.tuples()[0], 0), Some("x"));
    }

    #[test]
    fn write_then_read_preserves_labels() {
        let t = read_csv(FRAGMENT.as_bytes(), "null").unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &t, "null", None).unwrap();
        let back = read_csv(buf.as_slice(), "null").unwrap();
        assert_eq!(back, t);
    }
}

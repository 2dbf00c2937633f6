//! Fixed-width text tables.

pub struct Table {
    widths: Vec<usize>,
    right: Vec<bool>,
    lines: Vec<String>,
}

impl Table {
    /// `columns` pairs a header with a width; a negative width right-aligns.
    pub fn new(columns: &[(&str, isize)]) -> Self {
        let widths: Vec<usize> = columns.iter().map(|&(_, w)| w.unsigned_abs()).collect();
        let right: Vec<bool> = columns.iter().map(|&(_, w)| w < 0).collect();
        let mut t = Table {
            widths,
            right,
            lines: Vec::new(),
        };
        let header: Vec<String> = columns.iter().map(|(h, _)| h.to_string()).collect();
        let line = t.format(&header);
        t.lines.push(line);
        let rule = t.widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-");
        t.lines.push(rule);
        t
    }

    fn format(&self, cells: &[String]) -> String {
        cells
            .iter()
            .zip(self.widths.iter().zip(&self.right))
            .map(|(c, (&w, &right))| {
                let c: String = c.chars().take(w).collect();
                if right {
                    format!("{c:>w$}")
                } else {
                    format!("{c:<w$}")
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    }

    pub fn row(&mut self, cells: &[String]) {
        let line = self.format(cells);
        self.lines.push(line);
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

pub fn fixed(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_stable() {
        let mut t = Table::new(&[("Dataset", 10), ("% in Top 3", -10)]);
        t.row(&["diabetes".into(), "60.5%".into()]);
        t.row(&["a-very-long-name".into(), "1.0%".into()]);
        assert_eq!(
            t.render(),
            "Dataset    | % in Top 3\n-----------+-----------\ndiabetes   |      60.5%\na-very-lon |       1.0%\n"
        );
    }
}

use std::fmt::Write as _;

use super::{AccuracyRecord, BoxPlotStats};

pub fn records_to_csv(records: &[AccuracyRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("writing to memory");
    }
    if records.is_empty() {
        w.write_record([
            "model_id",
            "blob_accuracy",
            "edge_accuracy",
            "blobs_matched",
            "blobs_missed",
            "blobs_spurious",
            "edges_matched",
            "edges_missed",
            "edges_spurious",
            "edge_precision",
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8")
}

pub fn records_from_csv(text: &str) -> Result<Vec<AccuracyRecord>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

/// Box-and-whisker chart of percentage series on a 0–100 axis.
pub fn boxplot_svg(title: &str, series: &[(String, BoxPlotStats)]) -> String {
    let (w, h) = (120 + 140 * series.len().max(1), 360);
    let (top, bottom) = (40.0, 300.0);
    let y = |v: f64| bottom - (v.clamp(0.0, 100.0) / 100.0) * (bottom - top);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2, escape(title));
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(s, r##"<line x1="60" y1="{ty}" x2="{}" y2="{ty}" stroke="#ddd"/>"##, w - 20);
        let _ = writeln!(s, r#"<text x="52" y="{}" text-anchor="end">{tick}</text>"#, ty + 4.0);
    }
    for (i, (name, st)) in series.iter().enumerate() {
        let cx = 130.0 + 140.0 * i as f64;
        let (l, r) = (cx - 30.0, cx + 30.0);
        let _ = writeln!(s, r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#, y(st.max), y(st.q3));
        let _ = writeln!(s, r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#, y(st.q1), y(st.min));
        for v in [st.min, st.max] {
            let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, cx - 12.0, y(v), cx + 12.0, y(v));
        }
        let _ = writeln!(
            s,
            r##"<rect x="{l}" y="{}" width="60" height="{}" fill="#9ecae1" stroke="black"/>"##,
            y(st.q3),
            (y(st.q1) - y(st.q3)).max(0.5)
        );
        let _ = writeln!(s, r#"<line x1="{l}" y1="{}" x2="{r}" y2="{}" stroke="black" stroke-width="2"/>"#, y(st.median), y(st.median));
        let _ = writeln!(s, r#"<circle cx="{cx}" cy="{}" r="3" fill="red"/>"#, y(st.mean));
        let _ = writeln!(s, r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#, bottom + 20.0, escape(name));
        let _ = writeln!(s, r#"<text x="{cx}" y="{}" text-anchor="middle">n={}</text>"#, bottom + 36.0, st.n);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::boxplot;

    fn rec(id: &str, b: f64) -> AccuracyRecord {
        AccuracyRecord {
            model_id: id.into(),
            blob_accuracy: b,
            edge_accuracy: 50.0,
            blobs_matched: 1,
            blobs_missed: 0,
            blobs_spurious: 0,
            edges_matched: 1,
            edges_missed: 1,
            edges_spurious: 0,
            edge_precision: 100.0,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![rec("a", 100.0), rec("b", 87.5)];
        let text = records_to_csv(&rs);
        assert!(text.starts_with("model_id,blob_accuracy,edge_accuracy,"));
        assert_eq!(records_from_csv(&text).unwrap(), rs);
        assert_eq!(records_to_csv(&[]).lines().count(), 1);
    }

    #[test]
    fn svg_has_one_box_per_series() {
        let st = boxplot(&[10.0, 50.0, 90.0]).unwrap();
        let svg = boxplot_svg("Blob <accuracy>", &[("StyleK".into(), st), ("StyleC".into(), st)]);
        assert_eq!(svg.matches("<rect x=").count(), 2);
        assert!(svg.contains("Blob &lt;accuracy&gt;"));
    }
}

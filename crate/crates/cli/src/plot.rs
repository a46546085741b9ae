//! Log-log convergence chart as a self-contained SVG.

use std::fmt::Write as _;

use hyperspde::harness::CsvTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 470.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 360.0;
const COLORS: [&str; 6] = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377"];

struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn map(&self, log_value: f64) -> f64 {
        self.from + (log_value - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

/// Guide line `c·h^order` through `anchor` at the largest step.
fn guide(order: f64, h_max: f64, anchor: f64) -> impl Fn(f64) -> f64 {
    move |h| anchor * (h / h_max).powf(order)
}

pub fn render(table: &CsvTable) -> String {
    let hs: Vec<f64> = table.rows.iter().map(|r| r.0).collect();
    let h_max = hs.iter().cloned().fold(f64::MIN, f64::max);
    let h_min = hs.iter().cloned().fold(f64::MAX, f64::min);
    let first = table
        .rows
        .iter()
        .find(|r| r.0 == h_max)
        .map(|r| r.1.clone())
        .unwrap();
    let column = |name: &str, fallback: usize| {
        let idx = table.columns.iter().position(|c| c == name).unwrap_or(fallback);
        first[idx.min(first.len() - 1)]
    };
    let half = guide(0.5, h_max, 1.25 * column("EXE", 0));
    let one = guide(1.0, h_max, 0.8 * column("EXM", first.len() - 1));

    let mut values: Vec<f64> = table.rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    values.extend([half(h_max), half(h_min), one(h_max), one(h_min)]);
    let y_lo = values.iter().map(|v| v.log2()).fold(f64::MAX, f64::min).floor();
    let y_hi = values.iter().map(|v| v.log2()).fold(f64::MIN, f64::max).ceil();
    let x_lo = h_min.log2().floor() - 0.5;
    let x_hi = h_max.log2().ceil() + 0.5;
    let x = Axis { lo: x_lo, hi: x_hi, from: LEFT, to: RIGHT };
    let y = Axis {
        lo: y_lo,
        hi: if y_hi > y_lo { y_hi } else { y_lo + 1.0 },
        from: BOTTOM,
        to: TOP,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    let mut k = x_lo.ceil();
    while k <= x_hi {
        let px = x.map(k);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{BOTTOM}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">2^{k}</text>"#,
            BOTTOM + 5.0,
            BOTTOM + 18.0
        );
        k += 1.0;
    }
    let mut k = y.lo;
    while k <= y.hi {
        let py = y.map(k);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">2^{k}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
        k += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Step size</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Uniform L2 error</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    for (i, name) in table.columns.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if i >= 3 { r#" stroke-dasharray="6 3""# } else { "" };
        let points: Vec<String> = table
            .rows
            .iter()
            .map(|(h, v)| format!("{:.2},{:.2}", x.map(h.log2()), y.map(v[i].log2())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"><title>{name}</title></polyline>"#,
            points.join(" ")
        );
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="490" y1="{ly:.2}" x2="515" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/><text x="522" y="{:.2}">{name}</text>"#,
            ly + 4.0
        );
    }
    for (offset, (label, f, dash)) in [("order 0.5", &half as &dyn Fn(f64) -> f64, "2 3"), ("order 1.0", &one, "8 4")]
        .into_iter()
        .enumerate()
    {
        let _ = writeln!(
            s,
            r#"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="{dash}"/>"#,
            x.map(h_max.log2()),
            y.map(f(h_max).log2()),
            x.map(h_min.log2()),
            y.map(f(h_min).log2())
        );
        let ly = TOP + 14.0 + 16.0 * (table.columns.len() + offset) as f64;
        let _ = writeln!(
            s,
            r#"<line x1="490" y1="{ly:.2}" x2="515" y2="{ly:.2}" stroke="gray" stroke-dasharray="{dash}"/><text x="522" y="{:.2}">{label}</text>"#,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

//! SVG figures: well-formed XML, one glyph per matrix cell, colour anchors.

use errstat::render::{render_abs_ecdf, render_delta_ecdf, render_matrix, RenderKind, RenderSpec};
use errstat_core::inference::BootstrapPlan;
use errstat_core::sip::delta_ecdf;

fn labels(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("M{j}")).collect()
}

fn spec(kind: RenderKind) -> RenderSpec {
    RenderSpec::new(kind, 400).unwrap()
}

/// Parses `svg` and returns the attributes of every `class="glyph"` element.
fn glyphs(svg: &str) -> Vec<(String, Vec<(String, String)>)> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("glyph"))
        .map(|n| {
            let attrs = n.attributes().map(|a| (a.name().to_string(), a.value().to_string())).collect();
            (n.tag_name().name().to_string(), attrs)
        })
        .collect()
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> &'a str {
    &attrs.iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn matrices_have_k_squared_glyphs() {
    for k in [1, 2, 5, 9] {
        let corr: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.3 }).collect())
            .collect();
        let svg = render_matrix(&corr, &labels(k), &spec(RenderKind::CorrEllipse)).unwrap();
        assert_eq!(glyphs(&svg).len(), k * k);

        let rank: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let svg = render_matrix(&rank, &labels(k), &spec(RenderKind::RankHeatmap)).unwrap();
        assert_eq!(glyphs(&svg).len(), k * k);

        let sip: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 0.0 } else { 0.5 }).collect()).collect();
        let svg = render_matrix(&sip, &labels(k), &spec(RenderKind::SipDisk)).unwrap();
        assert_eq!(glyphs(&svg).len(), k * k);
    }
}

#[test]
fn sip_half_is_white_and_extremes_are_coloured() {
    let sip = vec![vec![0.0, 0.5, 1.0], vec![0.5, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let svg = render_matrix(&sip, &labels(3), &spec(RenderKind::SipDisk)).unwrap();
    for (_, a) in glyphs(&svg) {
        let value: f64 = attr(&a, "data-value").parse().unwrap();
        let fill = attr(&a, "fill");
        if value == 0.5 {
            assert_eq!(fill, "#ffffff");
        } else if value == 1.0 || (value == 0.0 && attr(&a, "data-row") != attr(&a, "data-col")) {
            assert_ne!(fill, "#ffffff");
        }
    }
}

#[test]
fn identity_rank_matrix_fills_the_diagonal() {
    let k = 4;
    let p: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let svg = render_matrix(&p, &labels(k), &spec(RenderKind::RankHeatmap)).unwrap();
    for (tag, a) in glyphs(&svg) {
        assert_eq!(tag, "rect");
        let on_diagonal = attr(&a, "data-row") == attr(&a, "data-col");
        assert_eq!(attr(&a, "fill") == "#ffffff", !on_diagonal);
    }
}

#[test]
fn perfect_correlations_slant_opposite_ways() {
    let corr = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let svg = render_matrix(&corr, &labels(2), &spec(RenderKind::CorrEllipse)).unwrap();
    for (_, a) in glyphs(&svg) {
        let value: f64 = attr(&a, "data-value").parse().unwrap();
        let rx: f64 = attr(&a, "rx").parse().unwrap();
        let ry: f64 = attr(&a, "ry").parse().unwrap();
        assert!(ry < 0.05 * rx, "a perfect correlation is drawn as a line");
        let rotate = attr(&a, "transform");
        assert!(rotate.starts_with(if value > 0.0 { "rotate(-45" } else { "rotate(45" }), "{rotate}");
    }
}

#[test]
fn invalid_matrices_are_refused() {
    let bad_corr = vec![vec![1.0, 1.5], vec![1.5, 1.0]];
    assert!(render_matrix(&bad_corr, &labels(2), &spec(RenderKind::CorrEllipse)).is_err());
    let bad_rank = vec![vec![0.5, 0.4], vec![0.5, 0.6]];
    assert!(render_matrix(&bad_rank, &labels(2), &spec(RenderKind::RankHeatmap)).is_err());
    let bad_sip = vec![vec![0.1, 0.5], vec![0.5, 0.0]];
    assert!(render_matrix(&bad_sip, &labels(2), &spec(RenderKind::SipDisk)).is_err());
    assert!(render_matrix(&bad_sip, &labels(3), &spec(RenderKind::SipDisk)).is_err());
    assert!(RenderSpec::new(RenderKind::SipDisk, 199).is_err());
}

#[test]
fn labels_are_escaped() {
    let names = vec!["a<b".to_string(), "c&d".to_string()];
    let corr = vec![vec![1.0, 0.2], vec![0.2, 1.0]];
    let svg = render_matrix(&corr, &names, &spec(RenderKind::CorrEllipse)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().any(|n| n.text() == Some("a<b")));
}

#[test]
fn ecdf_figures_are_well_formed() {
    let a: Vec<f64> = (0..40).map(|i| ((i * 7) % 13) as f64 / 5.0 - 1.0).collect();
    let b: Vec<f64> = (0..40).map(|i| ((i * 5) % 11) as f64 / 4.0 - 1.2).collect();
    let report = delta_ecdf(&a, &b, &BootstrapPlan::new(200, 1)).unwrap().with_uncertainty_bar(0.3);
    let svg = render_delta_ecdf(&report, ("A", "B"), &spec(RenderKind::DeltaEcdf)).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    let svg = render_abs_ecdf(&[a, b], &labels(2), &spec(RenderKind::AbsEcdf)).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

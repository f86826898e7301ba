//! Text listing of kernels, spaces, densities, filtrations and studies.

use crate::config::Study;

struct Item {
    section: &'static str,
    name: &'static str,
    tags: &'static [&'static str],
    about: &'static str,
}

const ITEMS: &[Item] = &[
    Item { section: "kernel", name: "brownian_min", tags: &["psd", "interval", "trace_class"], about: "min(x, y); eigenvalues 1/(pi^2 (j - 1/2)^2) on [0, 1]" },
    Item { section: "kernel", name: "exp_abs", tags: &["psd"], about: "exp(-alpha |x - y|); field alpha" },
    Item { section: "kernel", name: "gaussian_rbf", tags: &["psd"], about: "exp(-gamma |x - y|^2); field gamma; no analytic spectrum" },
    Item { section: "kernel", name: "cosine_series", tags: &["psd", "circle"], about: "sum 2 a_m cos(m (x - y)); fields coeffs (inverse_square | inverse | {geometric: r} | list), M" },
    Item { section: "kernel", name: "rank_one_exp", tags: &["psd", "half_line", "trace_class"], about: "exp(-(x + y)); eigenvalue 1/2 under Lebesgue measure" },
    Item { section: "kernel", name: "constant", tags: &["psd", "trace_class"], about: "K = c; field c" },
    Item { section: "kernel", name: "sampled", tags: &["grid"], about: "row-major atoms x atoms CSV; fields path, psd" },
    Item { section: "space", name: "interval", tags: &["finite"], about: "[a, b); fields a, b" },
    Item { section: "space", name: "circle", tags: &["finite", "periodic"], about: "[0, circumference) with wraparound; field circumference" },
    Item { section: "space", name: "torus2", tags: &["finite", "periodic"], about: "product of two circles; field circumferences; atom_level <= 12" },
    Item { section: "space", name: "half_line", tags: &["sigma_finite"], about: "[0, inf) materialized on [0, window); field window" },
    Item { section: "density", name: "uniform", tags: &[], about: "constant c > 0; set space.normalized for mu(X) = 1" },
    Item { section: "density", name: "polynomial", tags: &[], about: "sum coeffs[k] x^k, nonnegative on the domain" },
    Item { section: "density", name: "exponential_decay", tags: &["half_line"], about: "exp(-rate x)" },
    Item { section: "filtration", name: "dyadic", tags: &[], about: "2^n cells per axis at level n; field depth" },
    Item { section: "filtration", name: "cover", tags: &[], about: "set-difference chain of a cover, refined by basis sets; fields cover, basis, depth" },
];

fn study_tags(study: Study) -> &'static [&'static str] {
    match study {
        Study::TraceStudy | Study::Spectrum | Study::SandwichIdentity => &["dense"],
        Study::TruncationStudy => &["dense", "half_line"],
        Study::DoobConvergence | Study::MaximalFunction => &["seeded"],
        Study::PropertySuite => &["seeded", "dense"],
    }
}

fn matches(filter: Option<&str>, section: &str, name: &str, tags: &[&str]) -> bool {
    match filter {
        None => true,
        Some(f) => f == section || f == name || tags.contains(&f),
    }
}

fn line(section: &str, name: &str, tags: &[&str], about: &str) -> String {
    format!("{section:<11}{name:<20}[{}]  {about}\n", tags.join(", "))
}

/// Listing of everything that matches `filter` (a section, name or tag).
pub fn list_catalog(filter: Option<&str>) -> String {
    let mut out = String::new();
    for item in ITEMS {
        if matches(filter, item.section, item.name, item.tags) {
            out += &line(item.section, item.name, item.tags, item.about);
        }
    }
    for study in Study::ALL {
        if matches(filter, "study", study.name(), study_tags(study)) {
            out += &line("study", study.name(), study_tags(study), study.summary());
        }
    }
    out
}

//! One function per subcommand; each returns the full stdout text.

use num_traits::{ToPrimitive, Zero};
use odenorm::chains::{trace_chain, JetPoint};
use odenorm::expr::{format_series, parse_map};
use odenorm::invariants::{tresse_invariants, PointClass};
use odenorm::normalform::{
    decide_equivalence, normal_form_ode, special_normalize, NormalFormTable,
};
use odenorm::pseries::{format_rational, Rational, SeriesJson};
use odenorm::solutions::{integrate_to_manifold, transform_ode_with_map, PointMap};
use serde::Serialize;

use crate::input::{
    check_precision, check_weight, equation, expression, params, rationals, CliError,
};
use crate::Common;

type Out = Result<String, CliError>;

fn json<T: Serialize>(v: &T) -> Out {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Math(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct InvariantsJson {
    weight: u32,
    i1: SeriesJson,
    i2: SeriesJson,
    i1_at: String,
    i2_at: String,
    class: String,
}

/// `F` is used to weight `max(W, 6)`; the invariants come out four lower.
pub fn invariants(c: &Common) -> Out {
    check_weight(c.weight)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?.at_trunc(c.weight.max(6));
    let (i1, i2) = tresse_invariants(&f)?;
    let class = PointClass::from_values(i1.constant_term(), i2.constant_term());
    if c.json {
        return json(&InvariantsJson {
            weight: i1.trunc(),
            i1: i1.to_json(),
            i2: i2.to_json(),
            i1_at: format_rational(&class.i1_at),
            i2_at: format_rational(&class.i2_at),
            class: class.kind.to_string(),
        });
    }
    Ok(format!(
        "I1 = {}\nI2 = {}\nI1(0) = {}\nI2(0) = {}\nclass = {}\n",
        format_series(&i1),
        format_series(&i2),
        format_rational(&class.i1_at),
        format_rational(&class.i2_at),
        class.kind
    ))
}

#[derive(Serialize)]
struct ClassJson {
    class: String,
    i1_at: String,
    i2_at: String,
}

pub fn classify(c: &Common) -> Out {
    check_weight(c.weight)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?.at_trunc(c.weight.max(6));
    let (i1, i2) = tresse_invariants(&f)?;
    let class = PointClass::from_values(i1.constant_term(), i2.constant_term());
    let out = ClassJson {
        class: class.kind.to_string(),
        i1_at: format_rational(&class.i1_at),
        i2_at: format_rational(&class.i2_at),
    };
    if c.json {
        return json(&out);
    }
    Ok(format!(
        "class = {}\nI1(0) = {}\nI2(0) = {}\n",
        out.class, out.i1_at, out.i2_at
    ))
}

#[derive(Serialize)]
struct SolutionsJson {
    weight: u32,
    phi: SeriesJson,
}

pub fn solutions(c: &Common) -> Out {
    check_weight(c.weight)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?;
    let m = integrate_to_manifold(&f, c.weight)?;
    if c.json {
        return json(&SolutionsJson {
            weight: c.weight,
            phi: m.phi().to_json(),
        });
    }
    Ok(format!("Phi = {}\n", format_series(m.phi())))
}

#[derive(Serialize)]
struct MapJson {
    f: SeriesJson,
    g: SeriesJson,
}

impl MapJson {
    fn of(h: &PointMap) -> Self {
        Self {
            f: h.f.to_json(),
            g: h.g.to_json(),
        }
    }
}

#[derive(Serialize)]
struct NormalFormJson {
    #[serde(flatten)]
    table: NormalFormTable,
    map: MapJson,
}

pub fn normal_form(c: &Common, p: Option<&str>) -> Out {
    check_weight(c.weight)?;
    let p = params(p)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?;
    let (n, h, res) = normal_form_ode(&f, c.weight, &p)?;
    if c.json {
        return json(&NormalFormJson {
            table: NormalFormTable::new(&res, &n),
            map: MapJson::of(&h),
        });
    }
    Ok(format!(
        "N = {}\nPhi = {}\nf = {}\ng = {}\n",
        format_series(n.f()),
        format_series(res.phi.phi()),
        format_series(&h.f),
        format_series(&h.g)
    ))
}

fn exp_label(e: &[u32]) -> String {
    e.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

pub fn special_normal_form(c: &Common, precision: u64) -> Out {
    check_weight(c.weight)?;
    check_precision(precision)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?;
    let sf = special_normalize(&f, c.weight, precision)?;
    let doc = sf.to_json();
    if c.json {
        return json(&doc);
    }
    let mut out = format!(
        "epsilon = {}\nsigma = {}\ntau = {}\nz2_flipped = {}\n",
        doc.epsilon, doc.sigma, doc.tau, doc.z2_flipped
    );
    for t in &doc.float_terms {
        out.push_str(&format!("Phi[{}] = {}\n", exp_label(&t.exp), t.val));
    }
    for t in &doc.ode_float_terms {
        out.push_str(&format!("N[{}] = {}\n", exp_label(&t.exp), t.val));
    }
    Ok(out)
}

pub fn equivalent(
    ode1: &str,
    ode2: &str,
    at: Option<&str>,
    w: u32,
    precision: u64,
    as_json: bool,
) -> Out {
    check_weight(w)?;
    check_precision(precision)?;
    let f1 = equation("ode1", ode1, at)?;
    let f2 = equation("ode2", ode2, at)?;
    let v = decide_equivalence(&f1, &f2, w, precision)?;
    if as_json {
        return json(&v);
    }
    let mut out = format!("{}\nweight = {}\n", v.kind, v.weight);
    if let Some(wt) = &v.witness {
        out.push_str(&format!("witness = {}", wt.label));
        if let Some(e) = &wt.exp {
            out.push_str(&format!(" [{}]", exp_label(e)));
        }
        out.push_str(&format!("\nleft = {}\nright = {}\n", wt.left, wt.right));
        if let Some(g) = &wt.gap {
            out.push_str(&format!("gap = {g}\n"));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct TransformJson {
    weight: u32,
    ode: SeriesJson,
    map: MapJson,
}

pub fn transform(c: &Common, map: &str) -> Out {
    check_weight(c.weight)?;
    let f = equation("ode", &c.ode, c.at.as_deref())?;
    let (g1, g2) = parse_map(map, c.weight + 2).map_err(|e| expression("map", map, e))?;
    let h = PointMap::new(g1, g2).map_err(|e| CliError::Usage(format!("--map: {e}")))?;
    let (out, total) = transform_ode_with_map(&f, &h, c.weight)?;
    if c.json {
        return json(&TransformJson {
            weight: out.trunc(),
            ode: out.f().to_json(),
            map: MapJson::of(&total),
        });
    }
    Ok(format!(
        "F = {}\nf = {}\ng = {}\n",
        format_series(out.f()),
        format_series(&total.f),
        format_series(&total.g)
    ))
}

fn to_f64(flag: &str, q: &Rational) -> Result<f64, CliError> {
    q.to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Usage(format!("--{flag}: value out of range")))
}

pub fn chain(
    ode: &str,
    at: Option<&str>,
    dir: Option<&str>,
    step: f64,
    steps: usize,
    as_json: bool,
) -> Out {
    if !(step.is_finite() && step != 0.0) {
        return Err(CliError::Usage(format!(
            "--step must be finite and nonzero, got {step}"
        )));
    }
    let f = equation("ode", ode, None)?;
    let p = match at {
        None => JetPoint::origin(),
        Some(a) => {
            let v = rationals("at", a, 3)?;
            JetPoint::new(
                to_f64("at", &v[0])?,
                to_f64("at", &v[1])?,
                to_f64("at", &v[2])?,
            )
        }
    };
    let d = match dir {
        None => [Rational::zero(), Rational::zero()],
        Some(t) => {
            let v = rationals("dir", t, 2)?;
            [v[0].clone(), v[1].clone()]
        }
    };
    let c = trace_chain(&f, &p, &d, step, steps)?;
    if as_json {
        return json(&c);
    }
    Ok(c.to_csv())
}

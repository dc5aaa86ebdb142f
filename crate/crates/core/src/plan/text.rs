use std::fmt::Write as _;

use super::InsertionPlan;
use crate::fixed;
use crate::{Error, Result};

const PROXIMAL: &str = "The proximal (closest to the surgeon) marker";

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::IncompletePlan(name.into()))
    }
}

fn clearance(name: &str, x: f64) -> Result<f64> {
    let x = finite(name, x)?;
    if x < 0.0 {
        return Err(Error::IncompletePlan(format!("{name} (negative)")));
    }
    Ok(x)
}

/// Renders `plan` in the surgeon-facing text format: four paragraphs
/// separated by blank lines, ending with a newline.
///
/// Nerve and chorda clearances carry one decimal, the ossicle clearance and
/// the tilt are whole numbers. The over-insertion target is read directly
/// from `plan.overinsert_depth`.
pub fn emit_plan_text(plan: &InsertionPlan) -> Result<String> {
    let fn_mm = clearance("clearance_fn", plan.clearance_fn)?;
    let chorda = clearance("clearance_chorda", plan.clearance_chorda)?;
    let ossicles = clearance("clearance_ossicles", plan.clearance_ossicles)?;
    let tilt = finite("tilt_deg", plan.tilt_deg)?;
    let base = finite("base_depth", plan.base_depth)?;
    let over = finite("overinsert_depth", plan.overinsert_depth)?;
    let site = plan
        .entry_clock
        .map(|c| c.to_string())
        .unwrap_or_else(|| "center".to_string());

    let mut s = String::new();
    let _ = writeln!(s, "Entry site: {}.", plan.entry.kind.display_name());
    s.push('\n');
    let _ = writeln!(
        s,
        "Insertion vector: Distance of the insertion trajectory from the facial nerve: {} mm. \
         Distance of the insertion trajectory from the chorda: {} mm. \
         Distance of the insertion trajectory from the ossicles: {} mm. \
         Tilt of the optimal trajectory with the round window plane (0 degrees indicates perpendicular insertion): {} degrees. \
         Curl Direction (considering clock-face centered on the entry site and the stapes footplate is at 12 o'clock): {}. \
         Round window insertion site (considering clock-face centered on middle of round window and the stapes footplate is at 12 o'clock): {}.",
        fixed(fn_mm, 1),
        fixed(chorda, 1),
        fixed(ossicles, 0),
        fixed(tilt, 0),
        plan.curl_clock,
        site,
    );
    s.push('\n');
    let (past, inside) = if over >= 0.0 {
        ("past", "inside")
    } else {
        ("short of", "outside")
    };
    let over_mm = fixed(over.abs(), 1);
    let _ = writeln!(
        s,
        "Base insertion depth: {PROXIMAL} should be inserted until it is {over_mm} mm {past} the entry point."
    );
    s.push('\n');
    let middle = if base >= 0.0 { "inside" } else { "outside" };
    let _ = writeln!(
        s,
        "Pullback: After the array is inserted with the proximal (closest to the surgeon) marker {over_mm} mm {inside} \
         the entry point, then pullback the array until the middle marker is {} mm {middle} the entry point.",
        fixed(base.abs(), 1),
    );
    Ok(s)
}

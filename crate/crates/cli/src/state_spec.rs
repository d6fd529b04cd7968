//! Textual register-state specifications.

use cqed_mermin::qubits::{JointLabel, ThreeQubitState, DIM};
use num_complex::Complex64;

use crate::error::{CliError, Result};

/// Parses `"ghz"` (`(|000⟩ + i|111⟩)/√2`), `"ghz-noi"` (`(|000⟩ + |111⟩)/√2`),
/// a basis label such as `"|101>"`, or eight comma-separated complex
/// amplitudes (`"1, 0, 0, 0, 0, 0, 0, 0.5-0.5i"`), which are normalized.
pub fn state_spec_parse(text: &str) -> Result<ThreeQubitState> {
    let t = text.trim();
    match t.to_ascii_lowercase().as_str() {
        "ghz" => return Ok(ThreeQubitState::ghz()),
        "ghz-noi" => return Ok(ThreeQubitState::ghz_phase_free()),
        _ => {}
    }
    if t.contains(',') {
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() != DIM {
            return Err(CliError::parse(
                "state",
                text,
                format!("expected {DIM} amplitudes, got {}", parts.len()),
            ));
        }
        let mut amps = [Complex64::ZERO; DIM];
        for (a, p) in amps.iter_mut().zip(&parts) {
            *a = parse_complex(p)?;
        }
        return Ok(ThreeQubitState::normalized(amps)?);
    }
    JointLabel::parse(t)
        .map(ThreeQubitState::basis)
        .map_err(|_| CliError::parse("state", text, "expected ghz, ghz-noi, |ijk> or 8 amplitudes"))
}

/// `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`; exponents are allowed in both parts.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = |reason: &str| CliError::parse("amplitude", text, reason);
    if s.is_empty() {
        return Err(bad("empty"));
    }
    let number = |x: &str| x.parse::<f64>().map_err(|e| bad(&e.to_string()));
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return Ok(Complex64::new(number(&s)?, 0.0));
    };
    // split before the last sign that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (number(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => number(x)?,
    };
    let z = Complex64::new(re, im);
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(bad("not finite"));
    }
    Ok(z)
}

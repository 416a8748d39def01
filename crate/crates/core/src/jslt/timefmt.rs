//! The date-pattern subset accepted by `parse-time`: `yyyy MM dd HH mm ss`,
//! `X`/`XX`/`XXX` zone offsets, `'quoted'` literals and punctuation.

use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Year,
    Month,
    Day,
    Hour,
    Minute,
    Second,
    Zone,
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeFormat {
    source: String,
    parts: Vec<Part>,
}

impl TimeFormat {
    pub fn compile(source: &str) -> Result<Self, String> {
        let chars: Vec<char> = source.chars().collect();
        let mut parts = Vec::new();
        let mut literal = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '\'' {
                if chars.get(i + 1) == Some(&'\'') {
                    literal.push('\'');
                    i += 2;
                    continue;
                }
                let close = chars[i + 1..]
                    .iter()
                    .position(|&c| c == '\'')
                    .ok_or_else(|| format!("unterminated quote in time format {source:?}"))?;
                literal.extend(&chars[i + 1..i + 1 + close]);
                i += close + 2;
                continue;
            }
            if !c.is_ascii_alphabetic() {
                literal.push(c);
                i += 1;
                continue;
            }
            let run = chars[i..].iter().take_while(|&&x| x == c).count();
            let part = match (c, run) {
                ('y', 4) => Part::Year,
                ('M', 2) => Part::Month,
                ('d', 2) => Part::Day,
                ('H', 2) => Part::Hour,
                ('m', 2) => Part::Minute,
                ('s', 2) => Part::Second,
                ('X', 1..=3) => Part::Zone,
                _ => {
                    let token: String = chars[i..i + run].iter().collect();
                    return Err(format!("unsupported time format token {token:?} in {source:?}"));
                }
            };
            if !literal.is_empty() {
                parts.push(Part::Literal(std::mem::take(&mut literal)));
            }
            parts.push(part);
            i += run;
        }
        if !literal.is_empty() {
            parts.push(Part::Literal(literal));
        }
        Ok(TimeFormat {
            source: source.to_owned(),
            parts,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Seconds since the Unix epoch.
    pub fn parse(&self, input: &str) -> Result<f64, String> {
        let fail = || format!("time {input:?} does not match format {:?}", self.source);
        let mut rest = input;
        let (mut year, mut month, mut day) = (1970, 1, 1);
        let (mut hour, mut minute, mut second) = (0, 0, 0);
        let mut offset_secs: i64 = 0;
        for part in &self.parts {
            match part {
                Part::Literal(lit) => rest = rest.strip_prefix(lit.as_str()).ok_or_else(fail)?,
                Part::Year => year = take_digits(&mut rest, 4).ok_or_else(fail)? as i32,
                Part::Month => month = take_digits(&mut rest, 2).ok_or_else(fail)?,
                Part::Day => day = take_digits(&mut rest, 2).ok_or_else(fail)?,
                Part::Hour => hour = take_digits(&mut rest, 2).ok_or_else(fail)?,
                Part::Minute => minute = take_digits(&mut rest, 2).ok_or_else(fail)?,
                Part::Second => second = take_digits(&mut rest, 2).ok_or_else(fail)?,
                Part::Zone => offset_secs = take_zone(&mut rest).ok_or_else(fail)?,
            }
        }
        if !rest.is_empty() {
            return Err(fail());
        }
        let naive = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, minute, second))
            .ok_or_else(fail)?;
        Ok((naive.and_utc().timestamp() - offset_secs) as f64)
    }
}

fn take_digits(rest: &mut &str, width: usize) -> Option<u32> {
    let digits = rest.get(..width)?;
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    *rest = &rest[width..];
    digits.parse().ok()
}

/// `Z`, `±HH`, `±HHMM` or `±HH:MM`; returns the offset east of UTC.
fn take_zone(rest: &mut &str) -> Option<i64> {
    if let Some(r) = rest.strip_prefix('Z') {
        *rest = r;
        return Some(0);
    }
    let sign = match rest.as_bytes().first()? {
        b'+' => 1,
        b'-' => -1,
        _ => return None,
    };
    *rest = &rest[1..];
    let hours = i64::from(take_digits(rest, 2)?);
    let minutes = if let Some(r) = rest.strip_prefix(':') {
        *rest = r;
        i64::from(take_digits(rest, 2)?)
    } else {
        take_digits(rest, 2).map_or(0, i64::from)
    };
    if hours > 23 || minutes > 59 {
        return None;
    }
    Some(sign * (hours * 3600 + minutes * 60))
}

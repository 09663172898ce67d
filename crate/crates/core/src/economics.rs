//! Transaction sizes, fees, token-value calibration and identity costs.
//!
//! All money is integer satoshi. USD values are kept exact (satoshi times
//! cents-per-BTC) and only rounded, half-up to the cent, for display.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SATOSHI_PER_BTC: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EconomicsError {
    #[error("unknown transaction template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid USD quote `{0}`")]
    InvalidQuote(String),
    #[error("fee schedule field `{0}` must be positive")]
    NonPositive(&'static str),
}

/// USD per BTC, stored as whole cents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct UsdQuote {
    cents_per_btc: u64,
}

impl UsdQuote {
    pub fn from_cents(cents_per_btc: u64) -> Self {
        UsdQuote { cents_per_btc }
    }

    pub fn from_dollars(dollars: u64) -> Self {
        UsdQuote { cents_per_btc: dollars * 100 }
    }

    pub fn cents_per_btc(&self) -> u64 {
        self.cents_per_btc
    }
}

impl FromStr for UsdQuote {
    type Err = EconomicsError;

    /// Accepts `2720`, `2720.5` or `2720.50`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EconomicsError::InvalidQuote(s.to_string());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 2 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: u64 = whole.parse().map_err(|_| bad())?;
        let cents: u64 = match frac.len() {
            0 => 0,
            1 => frac.parse::<u64>().map_err(|_| bad())? * 10,
            _ => frac.parse().map_err(|_| bad())?,
        };
        Ok(UsdQuote { cents_per_btc: whole.checked_mul(100).and_then(|w| w.checked_add(cents)).ok_or_else(bad)? })
    }
}

impl fmt::Display for UsdQuote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.cents_per_btc / 100, self.cents_per_btc % 100)
    }
}

impl Serialize for UsdQuote {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for UsdQuote {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(UsdQuote::from_dollars(n)),
            Raw::Float(x) if x.is_finite() && x >= 0.0 => Ok(UsdQuote::from_cents((x * 100.0).round() as u64)),
            Raw::Float(x) => Err(serde::de::Error::custom(format!("invalid USD quote {x}"))),
        }
    }
}

/// Exact USD amount, held as `cents * 10^8`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Usd {
    scaled: u128,
}

impl Usd {
    const SCALE: u128 = SATOSHI_PER_BTC as u128;

    /// Rounded half-up to whole cents.
    pub fn cents(&self) -> u128 {
        (self.scaled + Self::SCALE / 2) / Self::SCALE
    }

    pub fn as_f64(&self) -> f64 {
        self.scaled as f64 / (Self::SCALE as f64 * 100.0)
    }

    /// Exact value in units of 10^-8 cents.
    pub fn scaled(&self) -> u128 {
        self.scaled
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.cents();
        write!(f, "{}.{:02}", c / 100, c % 100)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    /// Satoshi per byte.
    pub rate: u64,
    /// Minimum value of a standard non-data output, in satoshi.
    pub dust: u64,
    pub usd_per_btc: UsdQuote,
}

impl FeeSchedule {
    /// 360 sat/byte, 546 satoshi dust, 2720 USD/BTC.
    pub fn standard() -> Self {
        FeeSchedule { rate: 360, dust: 546, usd_per_btc: UsdQuote::from_dollars(2720) }
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        if self.rate == 0 {
            return Err(EconomicsError::NonPositive("rate"));
        }
        if self.dust == 0 {
            return Err(EconomicsError::NonPositive("dust"));
        }
        if self.usd_per_btc.cents_per_btc == 0 {
            return Err(EconomicsError::NonPositive("usd_per_btc"));
        }
        Ok(())
    }
}

impl Default for FeeSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Publish,
    Revoke,
    Request,
    Accept,
    RequestDouble,
    AcceptDouble,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::Publish,
        Template::Revoke,
        Template::Request,
        Template::Accept,
        Template::RequestDouble,
        Template::AcceptDouble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Publish => "publish",
            Template::Revoke => "revoke",
            Template::Request => "request",
            Template::Accept => "accept",
            Template::RequestDouble => "request_double",
            Template::AcceptDouble => "accept_double",
        }
    }

    /// Input/output composition, with a 33-byte commitment in the publish
    /// carrier and a 62-byte proof reference (32-byte hash, 30-byte locator)
    /// in request carriers.
    pub fn nominal_shape(self) -> TxShape {
        match self {
            Template::Publish => TxShape { p2pkh_inputs: 1, p2pkh_outputs: 1, p2sh_outputs: 1, data_carriers: vec![33], ..TxShape::default() },
            Template::Revoke => TxShape { multisig_inputs: 1, p2pkh_outputs: 1, ..TxShape::default() },
            Template::Request => TxShape { multisig_inputs: 1, p2pkh_outputs: 1, p2sh_outputs: 1, data_carriers: vec![62], ..TxShape::default() },
            Template::Accept => TxShape { p2pkh_inputs: 1, p2pkh_outputs: 1, ..TxShape::default() },
            Template::RequestDouble => TxShape { multisig_inputs: 2, p2pkh_outputs: 1, p2sh_outputs: 2, data_carriers: vec![62], ..TxShape::default() },
            Template::AcceptDouble => TxShape { p2pkh_inputs: 1, p2pkh_outputs: 2, ..TxShape::default() },
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = EconomicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| EconomicsError::UnknownTemplate(s.to_string()))
    }
}

/// Counts of inputs and outputs by kind, plus data-carrier payload lengths.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TxShape {
    pub p2pkh_inputs: u64,
    pub multisig_inputs: u64,
    pub p2pkh_outputs: u64,
    pub p2sh_outputs: u64,
    pub data_carriers: Vec<usize>,
}

/// Byte sizes per template, plus per-component constants for sizing other
/// shapes consistently.
///
/// The component constants are a linear fit that reproduces the six template
/// totals exactly: overhead 82, P2PKH input 75, 1-of-2 multisig input 113,
/// P2PKH output 34, P2SH output 32, data carrier 11 + payload. The publish
/// carrier also holds a 2-byte use limit; those bytes are absorbed by the fit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeModel {
    pub overhead: u64,
    pub p2pkh_input: u64,
    pub multisig_input: u64,
    pub p2pkh_output: u64,
    pub p2sh_output: u64,
    pub data_carrier_base: u64,
    templates: BTreeMap<Template, u64>,
}

impl SizeModel {
    pub fn standard() -> Self {
        let mut model = SizeModel {
            overhead: 82,
            p2pkh_input: 75,
            multisig_input: 113,
            p2pkh_output: 34,
            p2sh_output: 32,
            data_carrier_base: 11,
            templates: BTreeMap::new(),
        };
        for t in Template::ALL {
            let bytes = model.estimate(&t.nominal_shape());
            model.templates.insert(t, bytes);
        }
        model
    }

    /// Model with explicit template sizes only; other templates are unknown.
    pub fn with_templates(&self, templates: impl IntoIterator<Item = (Template, u64)>) -> Self {
        SizeModel { templates: templates.into_iter().collect(), ..self.clone() }
    }

    pub fn estimate(&self, shape: &TxShape) -> u64 {
        self.overhead
            + shape.p2pkh_inputs * self.p2pkh_input
            + shape.multisig_inputs * self.multisig_input
            + shape.p2pkh_outputs * self.p2pkh_output
            + shape.p2sh_outputs * self.p2sh_output
            + shape.data_carriers.iter().map(|&n| self.data_carrier_base + n as u64).sum::<u64>()
    }

    pub fn bytes(&self, template: Template) -> Result<u64, EconomicsError> {
        self.templates
            .get(&template)
            .copied()
            .ok_or_else(|| EconomicsError::UnknownTemplate(template.name().to_string()))
    }
}

impl Default for SizeModel {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn fee_of(template: Template, schedule: &FeeSchedule, model: &SizeModel) -> Result<u64, EconomicsError> {
    Ok(model.bytes(template)? * schedule.rate)
}

pub fn fee_for_shape(shape: &TxShape, schedule: &FeeSchedule, model: &SizeModel) -> u64 {
    model.estimate(shape) * schedule.rate
}

pub fn usd_of(satoshi: u64, schedule: &FeeSchedule) -> Usd {
    Usd { scaled: satoshi as u128 * schedule.usd_per_btc.cents_per_btc as u128 }
}

/// Satoshi one authentication removes from a token: request fee, accept fee,
/// and the dust forwarded to the issuer.
pub fn per_use_cost(schedule: &FeeSchedule, model: &SizeModel) -> Result<u64, EconomicsError> {
    Ok(fee_of(Template::Request, schedule, model)? + fee_of(Template::Accept, schedule, model)? + schedule.dust)
}

/// Token value `V = N (f_request + f_accept + D) + D`. For `N = 0` this is a
/// bare dust token.
pub fn calibrate_v(uses: u32, schedule: &FeeSchedule, model: &SizeModel) -> Result<u64, EconomicsError> {
    Ok(uses as u64 * per_use_cost(schedule, model)? + schedule.dust)
}

/// Use limit and the token value funding it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPolicy {
    pub uses: u32,
    pub value: u64,
}

impl TokenPolicy {
    /// Exact calibration plus an optional issuer-chosen margin.
    pub fn calibrated(uses: u32, margin: u64, schedule: &FeeSchedule, model: &SizeModel) -> Result<Self, EconomicsError> {
        Ok(TokenPolicy { uses, value: calibrate_v(uses, schedule, model)? + margin })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityCost {
    pub uses: u32,
    pub satoshi: u64,
    pub usd: Usd,
}

/// Issuer outlay for an `N`-use identity: `V + D + f_publish`.
pub fn identity_cost(uses: u32, schedule: &FeeSchedule, model: &SizeModel) -> Result<IdentityCost, EconomicsError> {
    let satoshi = calibrate_v(uses, schedule, model)? + schedule.dust + fee_of(Template::Publish, schedule, model)?;
    Ok(IdentityCost { uses, satoshi, usd: usd_of(satoshi, schedule) })
}

/// Published reference costs in cents at 360 sat/byte and 2720 USD/BTC, used
/// only to flag rows that disagree with the byte-derived figure.
pub const REFERENCE_USD_CENTS: [(Template, u64); 6] = [
    (Template::Publish, 261),
    (Template::Revoke, 224),
    (Template::Request, 328),
    (Template::Accept, 187),
    (Template::RequestDouble, 541),
    (Template::AcceptDouble, 220),
];

#[derive(Clone, Debug, Serialize)]
pub struct CostRow {
    pub template: Template,
    pub bytes: u64,
    pub fee_satoshi: u64,
    pub usd: Usd,
    /// Reference figure, when it differs from `usd` by more than one cent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_mismatch_cents: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CostTable {
    pub schedule: FeeSchedule,
    pub rows: Vec<CostRow>,
    pub identities: Vec<IdentityCost>,
}

pub fn cost_table(schedule: &FeeSchedule, model: &SizeModel, uses: &[u32]) -> Result<CostTable, EconomicsError> {
    let reference_applies = *schedule == FeeSchedule { dust: schedule.dust, ..FeeSchedule::standard() };
    let rows = Template::ALL
        .into_iter()
        .map(|t| {
            let bytes = model.bytes(t)?;
            let fee = fee_of(t, schedule, model)?;
            let usd = usd_of(fee, schedule);
            let reference = REFERENCE_USD_CENTS.iter().find(|(rt, _)| *rt == t).map(|(_, c)| *c);
            let reference_mismatch_cents = reference
                .filter(|&c| reference_applies && (c as i128 - usd.cents() as i128).abs() > 1);
            Ok(CostRow { template: t, bytes, fee_satoshi: fee, usd, reference_mismatch_cents })
        })
        .collect::<Result<Vec<_>, EconomicsError>>()?;
    let identities = uses.iter().map(|&n| identity_cost(n, schedule, model)).collect::<Result<_, _>>()?;
    Ok(CostTable { schedule: *schedule, rows, identities })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std() -> (FeeSchedule, SizeModel) {
        (FeeSchedule::standard(), SizeModel::standard())
    }

    #[test]
    fn template_sizes() {
        let (_, m) = std();
        let sizes: Vec<u64> = Template::ALL.iter().map(|&t| m.bytes(t).unwrap()).collect();
        assert_eq!(sizes, vec![267, 229, 334, 191, 479, 225]);
    }

    #[test]
    fn fee_examples() {
        let (s, m) = std();
        assert_eq!(fee_of(Template::Publish, &s, &m).unwrap(), 96_120);
        assert_eq!(fee_of(Template::Accept, &s, &m).unwrap(), 68_760);
        let zero = FeeSchedule { rate: 0, ..s };
        for t in Template::ALL {
            assert_eq!(fee_of(t, &zero, &m).unwrap(), 0);
        }
    }

    #[test]
    fn unknown_template() {
        let m = SizeModel::standard().with_templates([(Template::Publish, 267)]);
        assert!(matches!(fee_of(Template::Accept, &FeeSchedule::standard(), &m), Err(EconomicsError::UnknownTemplate(_))));
        assert!("txFoo".parse::<Template>().is_err());
        assert_eq!("request_double".parse::<Template>().unwrap(), Template::RequestDouble);
    }

    #[test]
    fn usd_examples() {
        let (s, m) = std();
        assert_eq!(usd_of(fee_of(Template::Publish, &s, &m).unwrap(), &s).to_string(), "2.61");
        assert_eq!(usd_of(120_240, &s).to_string(), "3.27");
        assert_eq!(usd_of(0, &s).to_string(), "0.00");
        // 0.0009612 BTC in satoshi
        assert_eq!(96_120 * 10_000_000, 9_612 * SATOSHI_PER_BTC);
    }

    #[test]
    fn half_up_rounding() {
        // 1 satoshi at 500000.00 USD/BTC = 0.5 cents -> rounds up.
        let s = FeeSchedule { usd_per_btc: UsdQuote::from_dollars(500_000), ..FeeSchedule::standard() };
        assert_eq!(usd_of(1, &s).cents(), 1);
        let s = FeeSchedule { usd_per_btc: UsdQuote::from_cents(49_999_999), ..FeeSchedule::standard() };
        assert_eq!(usd_of(1, &s).cents(), 0);
    }

    #[test]
    fn calibration_examples() {
        let (s, m) = std();
        assert_eq!(calibrate_v(1, &s, &m).unwrap(), 120_240 + 68_760 + 546 + 546);
        assert_eq!(calibrate_v(1, &s, &m).unwrap(), 190_092);
        assert_eq!(calibrate_v(0, &s, &m).unwrap(), 546);
        assert_eq!(calibrate_v(10, &s, &m).unwrap(), 1_896_006);
    }

    #[test]
    fn identity_cost_examples() {
        let (s, m) = std();
        let one = identity_cost(1, &s, &m).unwrap();
        assert_eq!(one.satoshi, 286_758);
        assert_eq!(one.usd.to_string(), "7.80");
        assert!((one.usd.as_f64() - (5.2 + 2.6)).abs() < 0.1);
        let ten = identity_cost(10, &s, &m).unwrap();
        assert_eq!(ten.satoshi, 1_992_672);
        assert_eq!(ten.usd.to_string(), "54.20");
        let degenerate = FeeSchedule { rate: 0, dust: 0, ..s };
        assert_eq!(identity_cost(7, &degenerate, &m).unwrap().satoshi, 0);
    }

    #[test]
    fn identity_cost_is_monotone() {
        let (s, m) = std();
        let cost = |n, rate, dust| identity_cost(n, &FeeSchedule { rate, dust, ..s }, &m).unwrap().satoshi;
        for n in 1..20 {
            assert!(cost(n + 1, 360, 546) > cost(n, 360, 546));
            assert!(cost(n, 361, 546) > cost(n, 360, 546));
            assert!(cost(n, 360, 547) > cost(n, 360, 546));
        }
    }

    #[test]
    fn double_templates_are_cheaper_than_two_singles() {
        let (s, m) = std();
        let f = |t| fee_of(t, &s, &m).unwrap();
        assert!(f(Template::RequestDouble) <= 2 * f(Template::Request));
        assert!(f(Template::AcceptDouble) <= 2 * f(Template::Accept));
    }

    #[test]
    fn quote_parsing() {
        assert_eq!("2720".parse::<UsdQuote>().unwrap().cents_per_btc(), 272_000);
        assert_eq!("2720.5".parse::<UsdQuote>().unwrap().cents_per_btc(), 272_050);
        assert_eq!("2720.05".parse::<UsdQuote>().unwrap().cents_per_btc(), 272_005);
        for bad in ["", ".5", "1.234", "-3", "abc", "1e3"] {
            assert!(bad.parse::<UsdQuote>().is_err(), "{bad}");
        }
        let s: FeeSchedule = serde_json::from_str(r#"{"rate":360,"dust":546,"usd_per_btc":2720}"#).unwrap();
        assert_eq!(s, FeeSchedule::standard());
    }

    #[test]
    fn cost_table_flags_only_request_double() {
        let (s, m) = std();
        let table = cost_table(&s, &m, &[1, 5, 10]).unwrap();
        let flagged: Vec<Template> = table.rows.iter().filter(|r| r.reference_mismatch_cents.is_some()).map(|r| r.template).collect();
        assert_eq!(flagged, vec![Template::RequestDouble]);
        let rd = &table.rows[4];
        assert_eq!(rd.usd.to_string(), "4.69");
    }
}

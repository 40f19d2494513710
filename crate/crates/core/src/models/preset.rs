use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::lsystem::{parse_model_with, GrowthFunction, ModelDefinition};
use crate::render::Camera;
use crate::turtle::{Material, MaterialTable, Rgb, TurtleConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Maize,
    Canola,
}

impl Species {
    pub fn as_str(self) -> &'static str {
        match self {
            Species::Maize => "maize",
            Species::Canola => "canola",
        }
    }
}

impl std::str::FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maize" => Ok(Species::Maize),
            "canola" => Ok(Species::Canola),
            _ => Err(Error::invalid(format!("unknown species '{s}'"))),
        }
    }
}

/// A per-plant random parameter: Normal(mean, sd) clamped to mean ± 3 sd
/// and then to the optional physical bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticParam {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl StochasticParam {
    /// Maps a standard normal draw to a parameter value.
    pub fn value(&self, z: f64) -> f64 {
        let mut v = self.mean + self.sd * z.clamp(-3.0, 3.0);
        if let Some(lo) = self.min {
            v = v.max(lo);
        }
        if let Some(hi) = self.max {
            v = v.min(hi);
        }
        v
    }
}

/// Fixed framing used when rendering plants of a preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct View {
    /// World-space height covered by the orthographic viewport.
    pub extent: f64,
    pub center: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModelPreset {
    pub name: String,
    pub species: Species,
    pub variant: u32,
    /// Simulated days; day `d` is the string after `d` derivation steps.
    pub timeline: u32,
    pub phyllotaxy: f64,
    pub params: Vec<StochasticParam>,
    /// Target branch-count histogram (count → weight).
    pub target: Option<BTreeMap<u32, f64>>,
    pub view: View,
    pub materials: MaterialTable,
    /// Growth function giving relative blade width along the midrib.
    pub leaf_profile: Option<String>,
    /// Parsed with every stochastic parameter (and `phyllotaxy`) bound to
    /// its mean as an external constant.
    pub model: ModelDefinition,
}

impl PlantModelPreset {
    pub fn param(&self, name: &str) -> Option<&StochasticParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut StochasticParam> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Orthographic camera for this species: maize from the side, looking
    /// along the x axis at the leaf plane; canola from directly above.
    pub fn camera(&self, width: u32, height: u32) -> Camera {
        let c = self.view.center;
        let (eye, up) = match self.species {
            Species::Maize => (c + Vec3::X * 20.0, Vec3::Z),
            Species::Canola => (c + Vec3::Z * 20.0, Vec3::Y),
        };
        Camera::orthographic(eye, c, up, self.view.extent, width, height)
    }

    pub fn turtle_config(&self) -> TurtleConfig {
        let leaf_profile = self
            .leaf_profile
            .as_deref()
            .and_then(|n| self.model.growth_function(n))
            .cloned()
            .unwrap_or_else(|| GrowthFunction::constant(1.0));
        TurtleConfig {
            leaf_profile,
            materials: self.materials.clone(),
            ..TurtleConfig::default()
        }
    }

    /// Normalised target histogram, if the preset stores one.
    pub fn target_distribution(&self) -> Option<BTreeMap<u32, f64>> {
        let t = self.target.as_ref()?;
        let total: f64 = t.values().sum();
        (total > 0.0).then(|| t.iter().map(|(&k, &v)| (k, v / total)).collect())
    }

    /// Applies `key = value` adjustments. Keys: `timeline`,
    /// `param.NAME.mean`, `param.NAME.sd`, `const.NAME`, `growth.NAME.stretch`.
    /// A bare `NAME` means the mean of that parameter, or else that constant.
    pub fn apply_override(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::invalid(format!("{key}: value must be finite")));
        }
        if !key.contains('.') && key != "timeline" {
            let full = if self.param(key).is_some() {
                format!("param.{key}.mean")
            } else {
                format!("const.{key}")
            };
            return self.apply_override(&full, value);
        }
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["timeline"] => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::invalid("timeline must be a positive integer"));
                }
                self.timeline = value as u32;
            }
            ["param", name, field @ ("mean" | "sd")] => {
                let p = self
                    .param_mut(name)
                    .ok_or_else(|| Error::invalid(format!("{key}: unknown parameter '{name}'")))?;
                if *field == "mean" {
                    p.mean = value;
                } else if value < 0.0 {
                    return Err(Error::invalid(format!("{key}: sd must be nonnegative")));
                } else {
                    p.sd = value;
                }
                let mean = p.mean;
                self.model.set_constant(name, mean);
            }
            ["const", name] => {
                if self.model.external.contains(*name) || !self.model.set_constant(name, value) {
                    return Err(Error::invalid(format!("{key}: unknown model constant '{name}'")));
                }
            }
            ["growth", name, "stretch"] => {
                if !(value > 0.0) {
                    return Err(Error::invalid(format!("{key}: stretch must be positive")));
                }
                self.model
                    .growth_function_mut(name)
                    .ok_or_else(|| Error::invalid(format!("{key}: unknown growth function '{name}'")))?
                    .stretch = value;
            }
            _ => return Err(Error::invalid(format!("unknown override key '{key}'"))),
        }
        Ok(())
    }

    /// Serializes back into the preset file format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[preset]\n");
        writeln!(out, "name: {}", self.name).unwrap();
        writeln!(out, "species: {}", self.species.as_str()).unwrap();
        writeln!(out, "variant: {}", self.variant).unwrap();
        writeln!(out, "timeline: {}", self.timeline).unwrap();
        writeln!(out, "phyllotaxy: {}", num(self.phyllotaxy)).unwrap();
        writeln!(
            out,
            "view: extent {} center {} {} {}",
            num(self.view.extent),
            num(self.view.center.x),
            num(self.view.center.y),
            num(self.view.center.z)
        )
        .unwrap();
        for p in &self.params {
            write!(out, "param {} mean {} sd {}", p.name, num(p.mean), num(p.sd)).unwrap();
            if let Some(v) = p.min {
                write!(out, " min {}", num(v)).unwrap();
            }
            if let Some(v) = p.max {
                write!(out, " max {}", num(v)).unwrap();
            }
            out.push('\n');
        }
        if let Some(t) = &self.target {
            let cells: Vec<String> = t.iter().map(|(k, v)| format!("{k}:{}", num(*v))).collect();
            writeln!(out, "target: {}", cells.join(" ")).unwrap();
        }
        writeln!(out, "material internode {}", material_text(&self.materials.internode)).unwrap();
        for (i, m) in self.materials.leaf.iter().enumerate() {
            writeln!(out, "material leaf {i} {}", material_text(m)).unwrap();
        }
        for (i, m) in self.materials.flower.iter().enumerate() {
            writeln!(out, "material flower {i} {}", material_text(m)).unwrap();
        }
        if let Some(lp) = &self.leaf_profile {
            writeln!(out, "leaf_profile: {lp}").unwrap();
        }
        out.push_str("[model]\n");
        out.push_str(&self.model.to_text());
        out
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn material_text(m: &Material) -> String {
    let rgb = |c: &Rgb| format!("{} {} {}", c[0], c[1], c[2]);
    match m {
        Material::Flat { color } => format!("flat {}", rgb(color)),
        Material::Veined { color, vein, half_width } => {
            format!("veined {} vein {} width {}", rgb(color), rgb(vein), num(*half_width))
        }
        Material::Texture { name } => format!("texture {name}"),
    }
}

struct Cursor<'a> {
    words: Vec<(usize, &'a str)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize, col0: usize) -> Self {
        let mut words = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    words.push((col0 + s, &text[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((col0 + s, &text[s..]));
        }
        Self {
            words,
            pos: 0,
            line,
            end_col: col0 + text.len(),
        }
    }

    fn col(&self) -> usize {
        self.words.get(self.pos).map_or(self.end_col, |w| w.0)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col(), msg)
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let w = self
            .words
            .get(self.pos)
            .ok_or_else(|| self.err(format!("expected {what}")))?
            .1;
        self.pos += 1;
        Ok(w)
    }

    fn peek(&self) -> Option<&'a str> {
        self.words.get(self.pos).map(|w| w.1)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let col = self.col();
        let w = self.next(&format!("'{kw}'"))?;
        if w != kw {
            return Err(ParseError::new(self.line, col, format!("expected '{kw}', found '{w}'")));
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        let col = self.col();
        let w = self.next(what)?;
        w.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ParseError::new(self.line, col, format!("invalid {what} '{w}'")))
    }

    fn byte(&mut self) -> Result<u8, ParseError> {
        let col = self.col();
        let w = self.next("color component")?;
        w.parse::<u8>()
            .map_err(|_| ParseError::new(self.line, col, format!("color component '{w}' is not in 0..=255")))
    }

    fn rgb(&mut self) -> Result<Rgb, ParseError> {
        Ok([self.byte()?, self.byte()?, self.byte()?])
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some(w) => Err(self.err(format!("unexpected '{w}'"))),
            None => Ok(()),
        }
    }
}

fn parse_material(c: &mut Cursor<'_>) -> Result<Material, ParseError> {
    let col = c.col();
    match c.next("material type")? {
        "flat" => Ok(Material::Flat { color: c.rgb()? }),
        "veined" => {
            let color = c.rgb()?;
            c.keyword("vein")?;
            let vein = c.rgb()?;
            c.keyword("width")?;
            let half_width = c.number("vein half width")?;
            if !(0.0..=0.5).contains(&half_width) {
                return Err(c.err("vein half width must be in [0, 0.5]"));
            }
            Ok(Material::Veined { color, vein, half_width })
        }
        "texture" => Ok(Material::Texture {
            name: c.next("texture name")?.to_string(),
        }),
        other => Err(ParseError::new(c.line, col, format!("unknown material type '{other}'"))),
    }
}

fn set_slot(list: &mut Vec<Material>, index: usize, m: Material, c: &Cursor<'_>) -> Result<(), ParseError> {
    if index != list.len() {
        return Err(c.err(format!("material index {index} out of sequence (expected {})", list.len())));
    }
    list.push(m);
    Ok(())
}

/// Parses a preset file: a `[preset]` header followed by `[model]` text.
pub fn parse_preset(text: &str) -> Result<PlantModelPreset, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let first = lines.by_ref().find(|(_, l)| {
        let t = l.split('#').next().unwrap().trim();
        !t.is_empty()
    });
    match first {
        Some((_, l)) if l.trim() == "[preset]" => {}
        Some((n, _)) => return Err(ParseError::new(n, 1, "expected '[preset]' header")),
        None => return Err(ParseError::new(1, 1, "empty preset")),
    }

    let mut name = None;
    let mut species = None;
    let mut variant = None;
    let mut timeline = None;
    let mut phyllotaxy = None;
    let mut view = None;
    let mut params: Vec<StochasticParam> = Vec::new();
    let mut target = None;
    let mut materials = MaterialTable {
        internode: Material::default(),
        leaf: Vec::new(),
        flower: Vec::new(),
    };
    let mut leaf_profile: Option<(usize, String)> = None;
    let mut model_start = None;
    let mut header_line = 1;

    for (n, raw) in lines.by_ref() {
        header_line = n;
        let line = raw.split('#').next().unwrap();
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "[model]" {
            model_start = Some(n);
            break;
        }
        let col0 = line.len() - line.trim_start().len() + 1;
        if let Some((key, value)) = trimmed.split_once(':') {
            let vcol = col0 + key.len() + 1 + (value.len() - value.trim_start().len());
            let value = value.trim();
            let mut c = Cursor::new(value, n, vcol);
            let key = key.trim();
            match key {
                "name" => name = Some(c.next("preset name")?.to_string()),
                "species" => {
                    let w = c.next("species")?;
                    species = Some(w.parse::<Species>().map_err(|e| ParseError::new(n, vcol, e.to_string()))?);
                }
                "variant" => {
                    let v = c.number("variant")?;
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(ParseError::new(n, vcol, "variant must be a positive integer"));
                    }
                    variant = Some(v as u32);
                }
                "timeline" => {
                    let v = c.number("timeline")?;
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(ParseError::new(n, vcol, "timeline must be a positive integer"));
                    }
                    timeline = Some(v as u32);
                }
                "phyllotaxy" => phyllotaxy = Some(c.number("phyllotaxy angle")?),
                "view" => {
                    c.keyword("extent")?;
                    let extent = c.number("view extent")?;
                    if !(extent > 0.0) {
                        return Err(ParseError::new(n, vcol, "view extent must be positive"));
                    }
                    c.keyword("center")?;
                    let center = Vec3::new(c.number("x")?, c.number("y")?, c.number("z")?);
                    view = Some(View { extent, center });
                }
                "target" => {
                    let mut hist = BTreeMap::new();
                    while let Some(w) = c.peek() {
                        let col = c.col();
                        c.pos += 1;
                        let bad = || ParseError::new(n, col, format!("expected COUNT:WEIGHT, found '{w}'"));
                        let (k, v) = w.split_once(':').ok_or_else(bad)?;
                        let k: u32 = k.parse().map_err(|_| bad())?;
                        let v: f64 = v.parse().ok().filter(|v: &f64| *v >= 0.0 && v.is_finite()).ok_or_else(bad)?;
                        if hist.insert(k, v).is_some() {
                            return Err(ParseError::new(n, col, format!("duplicate target bin {k}")));
                        }
                    }
                    if hist.values().sum::<f64>() <= 0.0 {
                        return Err(ParseError::new(n, vcol, "target histogram is empty"));
                    }
                    target = Some(hist);
                }
                "leaf_profile" => leaf_profile = Some((n, c.next("growth function name")?.to_string())),
                _ => return Err(ParseError::new(n, col0, format!("unknown preset key '{key}'"))),
            }
            c.finish()?;
            continue;
        }
        let mut c = Cursor::new(trimmed, n, col0);
        match c.next("directive")? {
            "param" => {
                let pname = c.next("parameter name")?.to_string();
                if params.iter().any(|p| p.name == pname) {
                    return Err(ParseError::new(n, col0, format!("duplicate parameter '{pname}'")));
                }
                c.keyword("mean")?;
                let mean = c.number("mean")?;
                c.keyword("sd")?;
                let sd = c.number("sd")?;
                if sd < 0.0 {
                    return Err(ParseError::new(n, col0, format!("parameter '{pname}' has negative sd")));
                }
                let (mut min, mut max) = (None, None);
                while let Some(w) = c.peek() {
                    c.pos += 1;
                    match w {
                        "min" => min = Some(c.number("min")?),
                        "max" => max = Some(c.number("max")?),
                        _ => {
                            c.pos -= 1;
                            return Err(c.err(format!("unexpected '{w}'")));
                        }
                    }
                }
                if let (Some(lo), Some(hi)) = (min, max) {
                    if lo > hi {
                        return Err(ParseError::new(n, col0, format!("parameter '{pname}' has min > max")));
                    }
                }
                params.push(StochasticParam {
                    name: pname,
                    mean,
                    sd,
                    min,
                    max,
                });
            }
            "material" => {
                let col = c.col();
                match c.next("organ kind")? {
                    "internode" => materials.internode = parse_material(&mut c)?,
                    kind @ ("leaf" | "flower") => {
                        let index = c.number("material index")?;
                        if index < 0.0 || index.fract() != 0.0 {
                            return Err(ParseError::new(n, col, "material index must be a nonnegative integer"));
                        }
                        let m = parse_material(&mut c)?;
                        let list = if kind == "leaf" {
                            &mut materials.leaf
                        } else {
                            &mut materials.flower
                        };
                        set_slot(list, index as usize, m, &c)?;
                    }
                    other => return Err(ParseError::new(n, col, format!("unknown organ kind '{other}'"))),
                }
            }
            other => return Err(ParseError::new(n, col0, format!("unknown preset directive '{other}'"))),
        }
        c.finish()?;
    }

    let model_start = model_start.ok_or_else(|| ParseError::new(header_line, 1, "missing '[model]' section"))?;
    let missing = |what: &str| ParseError::new(model_start, 1, format!("preset header is missing '{what}'"));
    let species = species.ok_or_else(|| missing("species"))?;
    let variant = variant.ok_or_else(|| missing("variant"))?;
    let timeline = timeline.ok_or_else(|| missing("timeline"))?;
    let phyllotaxy = phyllotaxy.ok_or_else(|| missing("phyllotaxy"))?;
    let view = view.ok_or_else(|| missing("view"))?;
    if species == Species::Maize && phyllotaxy != 180.0 {
        return Err(ParseError::new(model_start, 1, "maize presets require phyllotaxy 180"));
    }
    if params.iter().any(|p| p.name == "phyllotaxy") {
        return Err(ParseError::new(model_start, 1, "'phyllotaxy' is reserved"));
    }

    let mut external = vec![("phyllotaxy".to_string(), phyllotaxy)];
    external.extend(params.iter().map(|p| (p.name.clone(), p.mean)));
    let body: String = text.lines().skip(model_start).map(|l| format!("{l}\n")).collect();
    let model = parse_model_with(&body, &external, model_start)?;

    if let Some((ln, lp)) = &leaf_profile {
        if model.growth_function(lp).is_none() {
            return Err(ParseError::new(*ln, 1, format!("leaf_profile '{lp}' is not a growth function")));
        }
    }
    Ok(PlantModelPreset {
        name: name.unwrap_or_else(|| match species {
            Species::Maize => "maize".to_string(),
            Species::Canola => format!("canola-v{variant}"),
        }),
        species,
        variant,
        timeline,
        phyllotaxy,
        params,
        target,
        view,
        materials,
        leaf_profile: leaf_profile.map(|(_, n)| n),
        model,
    })
}

use std::collections::HashMap;

use rand::Rng;

use super::expr::Env;
use super::growth::GrowthFunction;
use super::parse::{ModelDefinition, ModuleTemplate, Production};
use super::symbol::{ModuleSymbol, Name, SymbolString};
use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};

/// Parallel rewriting engine for one model.
///
/// Every module of the current string is rewritten simultaneously. Modules
/// are visited left to right and each applicable stochastic production
/// consumes exactly one uniform draw, so results never depend on
/// scheduling.
pub struct Deriver<'m> {
    model: &'m ModelDefinition,
    by_name: HashMap<(Name, usize), Vec<usize>>,
    constants: Vec<f64>,
    growth: Vec<GrowthFunction>,
}

impl<'m> Deriver<'m> {
    pub fn new(model: &'m ModelDefinition) -> Self {
        let mut by_name: HashMap<(Name, usize), Vec<usize>> = HashMap::new();
        for (i, p) in model.productions.iter().enumerate() {
            by_name.entry((p.predecessor, p.params.len())).or_default().push(i);
        }
        Self {
            model,
            by_name,
            constants: model.constant_values(),
            growth: model.growth_functions(),
        }
    }

    pub fn axiom(&self) -> Result<SymbolString> {
        let env = Env::constants_only(&self.constants, &self.growth);
        let mut out = Vec::with_capacity(self.model.axiom.len());
        for t in &self.model.axiom {
            out.push(instantiate(t, &env, 0)?);
        }
        Ok(SymbolString::new(out))
    }

    fn matching(&self, m: &ModuleSymbol) -> Option<&Production> {
        let candidates = self.by_name.get(&(m.name, m.params.len()))?;
        candidates.iter().map(|&i| &self.model.productions[i]).find(|p| {
            p.condition.as_ref().is_none_or(|c| {
                let env = Env {
                    params: &m.params,
                    constants: &self.constants,
                    growth: &self.growth,
                };
                c.eval(&env) != 0.0
            })
        })
    }

    /// One parallel rewriting step. `step` is only used for error reports.
    pub fn step(&self, current: &SymbolString, rng: &mut SeededRng, step: usize) -> Result<SymbolString> {
        let limit = self.model.max_length;
        let mut out = Vec::with_capacity(current.len() + current.len() / 4);
        for m in current.iter() {
            let Some(p) = self.matching(m) else {
                out.push(m.clone());
                continue;
            };
            let successor = if p.is_stochastic() {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = p.successors.last().unwrap();
                for s in &p.successors {
                    acc += s.probability;
                    if u < acc {
                        chosen = s;
                        break;
                    }
                }
                chosen
            } else {
                &p.successors[0]
            };
            let env = Env {
                params: &m.params,
                constants: &self.constants,
                growth: &self.growth,
            };
            for t in &successor.modules {
                out.push(instantiate(t, &env, step)?);
            }
            if out.len() > limit {
                return Err(Error::StringTooLong { limit, step });
            }
        }
        Ok(SymbolString::new(out))
    }

    /// Derives `steps` steps from the axiom with a caller-owned generator,
    /// calling `visit` with every intermediate string (including step 0).
    pub fn run(&self, steps: usize, rng: &mut SeededRng, mut visit: impl FnMut(usize, &SymbolString)) -> Result<SymbolString> {
        let mut s = self.axiom()?;
        visit(0, &s);
        for k in 1..=steps {
            s = self.step(&s, rng, k)?;
            visit(k, &s);
        }
        Ok(s)
    }
}

fn instantiate(t: &ModuleTemplate, env: &Env<'_>, step: usize) -> Result<ModuleSymbol> {
    let mut params = Vec::with_capacity(t.args.len());
    for a in &t.args {
        let v = a.eval(env);
        if !v.is_finite() {
            return Err(Error::Data(format!(
                "module {} received a non-finite parameter at step {step}",
                t.name
            )));
        }
        params.push(v);
    }
    Ok(ModuleSymbol { name: t.name, params })
}

/// Derives `steps` parallel rewriting steps from the axiom.
pub fn derive(model: &ModelDefinition, steps: usize, seed: u64) -> Result<SymbolString> {
    let mut rng = seeded(seed);
    Deriver::new(model).run(steps, &mut rng, |_, _| {})
}

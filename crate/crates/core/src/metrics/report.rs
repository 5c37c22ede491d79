use std::fmt::Write as _;

use rayon::prelude::*;

use super::{
    amplitude_error, contingency, cor, crps_bivariate, fisher_exact, hss, log_score, phase_error,
    rmse, ContingencyTable, PairedSample,
};
use crate::error::{Error, Result};

/// Category 0 (inactive) and phases 1 to 8.
pub const HSS_CATEGORIES: u8 = 9;
pub const DEFAULT_HSS_LEADS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct LeadSkill {
    pub lead: usize,
    pub n_p: usize,
    pub cor: f64,
    pub rmse: f64,
    pub phase_error: f64,
    pub amplitude_error: f64,
    pub crps: Option<f64>,
    pub log_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HssCell {
    pub category: u8,
    pub lead: usize,
    pub table: ContingencyTable,
    pub hss: Option<f64>,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillReport {
    pub leads: Vec<LeadSkill>,
    /// Lead-major: all categories of lead 1, then lead 2, and so on.
    pub hss: Vec<HssCell>,
    pub hss_leads: usize,
    pub alpha: f64,
}

impl SkillReport {
    /// Scores `samples`, one per lead, and the category grid over the first
    /// `hss_leads` of them. Probabilistic scores are filled in when the
    /// samples carry covariances.
    pub fn compute(
        samples: &[PairedSample],
        hss_leads: usize,
        alpha: f64,
        exact_nll: bool,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Score("no lead samples to score".into()));
        }
        let hss_leads = hss_leads.min(samples.len());
        let leads = samples
            .par_iter()
            .map(|s| {
                let probabilistic = s.cov.is_some();
                Ok(LeadSkill {
                    lead: s.lead,
                    n_p: s.n_p(),
                    cor: cor(s)?,
                    rmse: rmse(s)?,
                    phase_error: phase_error(s)?,
                    amplitude_error: amplitude_error(s)?,
                    crps: probabilistic.then(|| crps_bivariate(s)).transpose()?,
                    log_score: probabilistic.then(|| log_score(s, exact_nll)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cells: Vec<(usize, u8)> = (0..hss_leads)
            .flat_map(|l| (0..HSS_CATEGORIES).map(move |c| (l, c)))
            .collect();
        let hss = cells
            .par_iter()
            .map(|&(l, category)| {
                let s = &samples[l];
                let table = contingency(s, category);
                let f = fisher_exact(&table, alpha);
                HssCell {
                    category,
                    lead: s.lead,
                    table,
                    hss: hss(&table),
                    p_value: f.p_value,
                    significant: f.significant,
                }
            })
            .collect();
        Ok(Self {
            leads,
            hss,
            hss_leads,
            alpha,
        })
    }

    pub fn cell(&self, category: u8, lead: usize) -> Option<&HssCell> {
        self.hss
            .iter()
            .find(|c| c.category == category && c.lead == lead)
    }

    /// Columns: `lead,n_p,cor,rmse,phase_error_deg,amplitude_error,crps,log_score`.
    /// Missing probabilistic scores are empty fields.
    pub fn skill_table(&self) -> String {
        let mut out =
            String::from("lead,n_p,cor,rmse,phase_error_deg,amplitude_error,crps,log_score\n");
        for r in &self.leads {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.lead,
                r.n_p,
                r.cor,
                r.rmse,
                r.phase_error,
                r.amplitude_error,
                opt(r.crps),
                opt(r.log_score)
            );
        }
        out
    }

    /// Columns: `category,lead,a,b,c,d,hss,p_value,significant`, where an
    /// undefined score is an empty field and `significant` is 0 or 1.
    pub fn hss_grid(&self) -> String {
        let mut out = String::from("category,lead,a,b,c,d,hss,p_value,significant\n");
        let mut cells: Vec<&HssCell> = self.hss.iter().collect();
        cells.sort_by_key(|c| (c.category, c.lead));
        for c in cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.category,
                c.lead,
                c.table.a,
                c.table.b,
                c.table.c,
                c.table.d,
                opt(c.hss),
                c.p_value,
                u8::from(c.significant)
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

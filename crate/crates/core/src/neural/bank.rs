//! Network bank: one taught network per operation class, stored as
//! versioned JSON.

use std::collections::BTreeMap;
use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::encode::{decode_toolpath, encode_feature, Encoding};
use super::network::Network;
use super::teach::TeachReport;
use super::NeuralError;
use crate::part_model::{Material, Tool};
use crate::planner::{cutting_parameters, order_operations, requested_operations, select_tool, Criteria, Operation, PlanSettings};
use crate::recognition::{FeatureModel, OperationClass};

pub const BANK_FORMAT: &str = "neurocnc-bank";
pub const BANK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BankEntry {
    pub network: Network,
    pub report: TeachReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Bank {
    pub format: String,
    pub version: u32,
    pub encoding: Encoding,
    pub networks: BTreeMap<OperationClass, BankEntry>,
}

impl Bank {
    pub fn new(encoding: Encoding) -> Self {
        Bank {
            format: BANK_FORMAT.to_string(),
            version: BANK_VERSION,
            encoding,
            networks: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bank serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| NeuralError::Bank(e.to_string()))?;
        if v.get("format").and_then(|f| f.as_str()) != Some(BANK_FORMAT) {
            return Err(NeuralError::Bank("not a network bank".to_string()));
        }
        let found = v.get("version").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if found != BANK_VERSION {
            return Err(NeuralError::BankVersion {
                found,
                expected: BANK_VERSION,
            });
        }
        let bank: Bank = serde_json::from_value(v).map_err(|e| NeuralError::Bank(e.to_string()))?;
        for (class, e) in &bank.networks {
            let n = &e.network;
            let ok = n.input_dim == bank.encoding.input_dim()
                && n.output_dim == bank.encoding.output_dim()
                && n.w1.len() == n.hidden_dim * n.input_dim
                && n.b1.len() == n.hidden_dim
                && n.w2.len() == n.output_dim * n.hidden_dim
                && n.b2.len() == n.output_dim;
            if !ok {
                return Err(NeuralError::Bank(format!("{class}: inconsistent dimensions")));
            }
        }
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|e| NeuralError::Bank(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Generates the operations of a part with the bank in place of the
/// teacher's cycle generators. Tool choice, cutting data lookups and the
/// operation order are the teacher's.
pub fn generate(
    bank: &Bank,
    fm: &FeatureModel,
    library: &[Tool],
    material: &Material,
    criteria: Criteria,
    settings: &PlanSettings,
) -> Result<Vec<Operation>, NeuralError> {
    let enc = &bank.encoding;
    let clearance_z = fm.stock.z_top() + settings.planner.clearance;
    let mut ops = Vec::new();
    for (f, class) in requested_operations(fm, settings) {
        let entry = bank.networks.get(&class).ok_or(NeuralError::MissingNetwork(class))?;
        let tool = select_tool(class, f, library, settings)?;
        let mut params = cutting_parameters(&tool, material, class, criteria, settings)?;
        let x = encode_feature(f, &tool, &fm.stock, enc)?;
        let y = entry.network.forward(&x)?;
        let d = decode_toolpath(&y, &fm.stock, clearance_z, enc)?;
        params.feed = d.feed;
        params.spindle_rpm = d.rpm;
        ops.push(Operation {
            class,
            feature_id: f.id.clone(),
            tool,
            params,
            toolpath: d.toolpath,
            clearance_z,
        });
    }
    order_operations(&mut ops);
    Ok(ops)
}

//! JSON interchange for circuits.
//!
//! GENERIC gates carry `"generator": {"paulis": [{"string": "XZ", "coeff": c}]}`,
//! meaning `X = -i Σ c P` over the gate's qubits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Circuit, GateInstance, GateKind};
use crate::dualrep::Generator;
use crate::error::{Error, Result};
use crate::qmath::PauliString;

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    num_qubits: usize,
    num_layers: usize,
    gates: Vec<GateJson>,
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    id: usize,
    kind: GateKind,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    layer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tie: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    paulis: Vec<PauliTermJson>,
}

#[derive(Serialize, Deserialize)]
struct PauliTermJson {
    string: String,
    coeff: f64,
}

impl From<&GateInstance> for GateJson {
    fn from(g: &GateInstance) -> Self {
        Self {
            id: g.id,
            kind: g.kind,
            qubits: g.qubits.clone(),
            theta: g.theta,
            layer: g.layer,
            generator: g.generator_override.as_ref().map(|gen| GeneratorJson {
                paulis: gen
                    .terms()
                    .iter()
                    .map(|t| PauliTermJson {
                        string: t.label(),
                        coeff: t.coeff,
                    })
                    .collect(),
            }),
            tie: g.tie,
        }
    }
}

impl TryFrom<GateJson> for GateInstance {
    type Error = Error;

    fn try_from(g: GateJson) -> Result<Self> {
        let generator_override = match g.generator {
            Some(gen) => {
                let terms = gen
                    .paulis
                    .into_iter()
                    .map(|t| PauliString::parse(&t.string, t.coeff))
                    .collect::<Result<Vec<_>>>()?;
                Some(Generator::from_terms(g.qubits.clone(), terms)?)
            }
            None => None,
        };
        Ok(GateInstance {
            id: g.id,
            kind: g.kind,
            qubits: g.qubits,
            theta: g.theta,
            layer: g.layer,
            generator_override,
            tie: g.tie,
        })
    }
}

impl Circuit {
    pub fn to_json(&self) -> Result<String> {
        let doc = CircuitJson {
            num_qubits: self.num_qubits,
            num_layers: self.num_layers,
            gates: self.gates.iter().map(GateJson::from).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses and validates a circuit document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitJson = serde_json::from_str(text)?;
        let gates = doc
            .gates
            .into_iter()
            .map(GateInstance::try_from)
            .collect::<Result<Vec<_>>>()?;
        Circuit::new(doc.num_qubits, doc.num_layers, gates)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

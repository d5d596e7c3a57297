use serde::{Deserialize, Serialize};

use crate::compress::{QLayer, QuantModel};
use crate::error::{Error, Result};
use crate::model::{model_file_bytes, Layer, Model};

/// How a layer uses the arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    /// Reads its input buffer and writes a fresh output buffer.
    Fresh,
    /// Overwrites its input buffer (2×2 max pooling).
    InPlace,
    /// Reinterprets its input buffer.
    Alias,
}

impl Step {
    fn of_float(l: &Layer) -> Step {
        match l {
            Layer::Conv2d { .. } | Layer::Dense { .. } => Step::Fresh,
            Layer::MaxPool2 => Step::InPlace,
            Layer::Flatten => Step::Alias,
        }
    }

    pub(crate) fn of_quant(l: &QLayer) -> Step {
        match l {
            QLayer::Conv2d { .. } | QLayer::Dense { .. } => Step::Fresh,
            QLayer::MaxPool2 => Step::InPlace,
            QLayer::Flatten => Step::Alias,
        }
    }
}

/// One activation buffer in the arena.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferPlan {
    /// Boundary index; 0 is the model input.
    pub boundary: usize,
    pub shape: Vec<usize>,
    pub bytes: usize,
    pub offset: usize,
}

/// Static activation memory and flash footprint of a model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPlan {
    /// Buffers in execution order. Flatten outputs alias their input and are
    /// not listed.
    pub buffers: Vec<BufferPlan>,
    /// Largest number of live activation bytes at any layer transition.
    pub peak_bytes: usize,
    /// Size of an arena holding every buffer at its planned offset.
    pub arena_bytes: usize,
    /// Parameter payload bytes.
    pub flash_bytes: usize,
    /// Serialized model file size.
    pub file_bytes: usize,
}

impl MemoryPlan {
    /// Offset of every boundary, flatten outputs included.
    pub(crate) fn boundary_offsets(&self, steps: &[Step]) -> Vec<usize> {
        let mut out = Vec::with_capacity(steps.len() + 1);
        let mut bufs = self.buffers.iter();
        out.push(bufs.next().map_or(0, |b| b.offset));
        for s in steps {
            let off = match s {
                Step::Alias => *out.last().unwrap(),
                _ => bufs.next().map_or(0, |b| b.offset),
            };
            out.push(off);
        }
        out
    }
}

/// First-fit placement: lowest offset whose span avoids every live buffer.
fn first_fit(size: usize, live: &[(usize, usize)]) -> usize {
    let mut candidates: Vec<usize> = std::iter::once(0).chain(live.iter().map(|&(o, n)| o + n)).collect();
    candidates.sort_unstable();
    candidates
        .into_iter()
        .find(|&c| live.iter().all(|&(o, n)| c + size <= o || o + n <= c))
        .expect("the end of the highest live buffer is always free")
}

fn plan(shapes: &[Vec<usize>], steps: &[Step], elem_bytes: usize) -> (Vec<BufferPlan>, usize, usize) {
    let bytes = |i: usize| shapes[i].iter().product::<usize>() * elem_bytes;
    let mut buffers = vec![BufferPlan {
        boundary: 0,
        shape: shapes[0].clone(),
        bytes: bytes(0),
        offset: 0,
    }];
    let mut current = (0usize, bytes(0));
    let mut peak = bytes(0);
    for (i, step) in steps.iter().enumerate() {
        let out = bytes(i + 1);
        match step {
            Step::Fresh => {
                let offset = first_fit(out, &[current]);
                peak = peak.max(current.1 + out);
                buffers.push(BufferPlan {
                    boundary: i + 1,
                    shape: shapes[i + 1].clone(),
                    bytes: out,
                    offset,
                });
                current = (offset, out);
            }
            Step::InPlace => {
                peak = peak.max(current.1);
                buffers.push(BufferPlan {
                    boundary: i + 1,
                    shape: shapes[i + 1].clone(),
                    bytes: out,
                    offset: current.0,
                });
                current = (current.0, out);
            }
            Step::Alias => peak = peak.max(current.1),
        }
    }
    let arena = buffers.iter().map(|b| b.offset + b.bytes).max().unwrap_or(0);
    (buffers, peak, arena)
}

/// Int8 activation plan of a quantized model.
pub fn plan_memory(qm: &QuantModel) -> MemoryPlan {
    let steps: Vec<Step> = qm.layers().iter().map(Step::of_quant).collect();
    let (buffers, peak_bytes, arena_bytes) = plan(qm.boundary_shapes(), &steps, 1);
    MemoryPlan {
        buffers,
        peak_bytes,
        arena_bytes,
        flash_bytes: qm.payload_bytes(),
        file_bytes: qm.file_bytes(),
    }
}

/// f32 activation plan of a float model, for comparison with the int8 plan.
pub fn plan_memory_float(model: &Model) -> Result<MemoryPlan> {
    let shapes = model.boundary_shapes()?;
    let steps: Vec<Step> = model.layers().iter().map(Step::of_float).collect();
    let (buffers, peak_bytes, arena_bytes) = plan(&shapes, &steps, 4);
    Ok(MemoryPlan {
        buffers,
        peak_bytes,
        arena_bytes,
        flash_bytes: model.payload_bytes(),
        file_bytes: model_file_bytes(model),
    })
}

pub const DEFAULT_FLASH_BUDGET: usize = 2_000_000;
pub const DEFAULT_RAM_BUDGET: usize = 512_000;

/// Target device limits in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub flash_bytes: usize,
    pub ram_bytes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            flash_bytes: DEFAULT_FLASH_BUDGET,
            ram_bytes: DEFAULT_RAM_BUDGET,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if self.flash_bytes == 0 || self.ram_bytes == 0 {
            return Err(Error::InvalidParam("budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margins {
    pub flash: i64,
    pub ram: i64,
}

pub const RAM_NOTE: &str = "ram covers the activation tensor arena only";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub flash_bytes: usize,
    pub flash_budget: usize,
    pub ram_peak_bytes: usize,
    pub ram_budget: usize,
    pub pass: bool,
    /// Budget minus usage; negative means over budget.
    pub margins: Margins,
    pub arena_bytes: usize,
    pub file_bytes: usize,
    pub note: String,
}

impl BudgetReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn check_budget(plan: &MemoryPlan, budget: &Budget) -> BudgetReport {
    let flash = budget.flash_bytes as i64 - plan.flash_bytes as i64;
    let ram = budget.ram_bytes as i64 - plan.peak_bytes as i64;
    BudgetReport {
        flash_bytes: plan.flash_bytes,
        flash_budget: budget.flash_bytes,
        ram_peak_bytes: plan.peak_bytes,
        ram_budget: budget.ram_bytes,
        pass: flash >= 0 && ram >= 0,
        margins: Margins { flash, ram },
        arena_bytes: plan.arena_bytes,
        file_bytes: plan.file_bytes,
        note: RAM_NOTE.into(),
    }
}

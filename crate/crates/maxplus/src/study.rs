//! The seed/dropout study spread over worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use maxplus_core::train::{study_cell_config, train, SeedStudy};
use maxplus_core::{Dataset, Result, TrainConfig};

/// Trains every `(ratio, seed)` cell on up to `threads` workers. Cells are
/// independent runs, so the table equals the sequential one.
pub fn parallel_seed_study(
    base: &TrainConfig,
    seeds: &[u64],
    ratios: &[f64],
    train_set: &Dataset,
    val_set: &Dataset,
    threads: usize,
    on_cell: &(dyn Fn(u64, f64, f64) + Sync),
) -> Result<SeedStudy> {
    let cells: Vec<(usize, usize)> =
        (0..ratios.len()).flat_map(|r| (0..seeds.len()).map(move |s| (r, s))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<f64>>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(r, s)) = cells.get(i) else { break };
                let cfg = study_cell_config(base, seeds[s], ratios[r]);
                let acc = train(&cfg, train_set, val_set).map(|(_, log)| log.last().map_or(0.0, |e| e.val_accuracy));
                if let Ok(a) = acc {
                    on_cell(seeds[s], ratios[r], a);
                }
                results.lock().unwrap()[i] = Some(acc);
            });
        }
    });
    let mut table = vec![vec![0.0; seeds.len()]; ratios.len()];
    for ((r, s), acc) in cells.into_iter().zip(results.into_inner().unwrap()) {
        table[r][s] = acc.expect("every cell was claimed")?;
    }
    SeedStudy::from_cells(seeds.to_vec(), ratios.to_vec(), table)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use slicer_core::evaluate::SimulationConfig;
use slicer_core::pipeline::{run_pipeline, PipelineConfig, ScenarioSource};
use slicer_core::scenario::GenerationParams;

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let source = ScenarioSource::Generate(GenerationParams::with_users(20, 4));
    let sim = Some(SimulationConfig { duration: 5.0, runs: 2, ..Default::default() });
    for dir in [a.path(), b.path()] {
        let cfg = PipelineConfig { simulation: sim, ..PipelineConfig::new(source.clone(), dir) };
        run_pipeline(&cfg).unwrap();
    }
    let (x, y) = (contents(a.path()), contents(b.path()));
    assert!(x.len() >= 17, "{:?}", x.keys());
    assert_eq!(x, y);
}

#[test]
fn scenario_file_source_matches_generated() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let params = GenerationParams::with_users(5, 9);
    run_pipeline(&PipelineConfig::new(ScenarioSource::Generate(params), a.path())).unwrap();
    let file = ScenarioSource::File(a.path().join("scenario.json"));
    run_pipeline(&PipelineConfig::new(file, b.path())).unwrap();
    assert_eq!(contents(a.path()), contents(b.path()));
}

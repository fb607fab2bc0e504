//! Bundle a demo scene into a config directory, then validate, attach and
//! export it through the same entry points the command-line tool uses.
use kitbash::demo;
use kitbash::pipeline::{bundle_tree, load_scene, run_attach, write_run};

fn main() -> kitbash::Result<()> {
    let dir = std::env::temp_dir().join("kitbash_pipeline_example");
    std::fs::create_dir_all(&dir)?;
    let tree = demo::corner_scene(2);
    let config = bundle_tree(&tree, &Default::default(), &dir)?;
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).expect("config serializes"))?;
    println!("wrote {}", path.display());

    let scene = load_scene(&path)?;
    let output = run_attach(&scene)?;
    for part in &output.report.parts {
        println!("{}: energy {:.3e} after {} iterations", part.part_id, part.energy, part.iterations);
    }
    let out = dir.join("out");
    write_run(&scene, &output, &out)?;
    println!("placements and report in {}", out.display());
    println!("try: kitbash solve --config {} --out {}", path.display(), out.display());
    Ok(())
}

//! Hand-built scenes and planner scripts for replay.

use crate::world::{Material, ObjectSpec, Scene, SceneDocument, Task};

/// Yellow plastic, blue glass and green ceramic blocks; the task asks for glass.
pub fn glass_block_scene() -> (Scene, Task) {
    let scene = Scene::new(vec![
        ObjectSpec::new("yellow block", Material::Plastic),
        ObjectSpec::new("blue block", Material::Glass),
        ObjectSpec::new("green block", Material::Ceramic),
    ])
    .expect("distinct labels");
    let task = Task::pick_material(Material::Glass, &scene).expect("one glass block");
    (scene, task)
}

pub fn glass_block_document() -> SceneDocument {
    let (scene, task) = glass_block_scene();
    SceneDocument::new(&scene, &task)
}

/// Planner outputs of the glass-block example, `done()` included.
pub fn glass_block_script() -> Vec<String> {
    [
        "robot.weigh(yellow block)",
        "robot.weigh(blue block)",
        "robot.knock_on(blue block)",
        "robot.pick_up(blue block)",
        "done()",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

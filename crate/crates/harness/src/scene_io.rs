//! Scene files: JSON in the schema of [`Scene`], checked on load.

use std::fs;
use std::path::Path;

use handoff_core::geometry::{GeometryError, Scene};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        source: std::io::Error,
    },
    /// Malformed JSON or a field of the wrong shape.
    #[error("{origin}:{line}:{column}: at `{field}`: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    /// Well-formed but geometrically unusable.
    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        source: GeometryError,
    },
}

impl SceneError {
    /// Unreachable poses and domain violations, as opposed to bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SceneError::Invalid {
                source: GeometryError::Unreachable(_) | GeometryError::DomainViolation(_),
                ..
            }
        )
    }
}

/// Parses and checks a scene. `origin` names the source in diagnostics.
pub fn parse_scene(text: &str, origin: &str) -> Result<Scene, SceneError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let scene: Scene = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        SceneError::Parse {
            origin: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: strip_position(&inner.to_string()),
        }
    })?;
    let invalid = |source| SceneError::Invalid {
        origin: origin.to_string(),
        source,
    };
    scene.validate().map_err(invalid)?;
    scene.problem_domain().map_err(invalid)?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        origin: origin.clone(),
        source,
    })?;
    parse_scene(&text, &origin)
}

pub fn scene_to_json(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scenes serialize");
    s.push('\n');
    s
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

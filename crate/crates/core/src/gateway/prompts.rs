use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendKind, BackendRequest};

/// Versioned prompt wording for the vision-language calls.
///
/// The version string and the rendered text are both part of every request
/// payload, so editing a template changes the fixture keys and stale
/// recordings stop matching instead of being silently reused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub version: String,
    pub extract: String,
    pub extract_reformat: String,
    /// Placeholders: `{description}`, `{shortlist}`.
    pub match_material: String,
    /// Placeholders: `{description}`, `{shortlist}`, `{previous}`.
    pub match_correction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            version: "2024-materials-v1".into(),
            extract: "You are looking at an AI-generated interior design image. Identify exactly ten \
                      architectural or construction material finishes visible in it (floors, walls, ceilings, \
                      joinery, cladding, glazing, worktops, structure). Exclude furniture and decorative \
                      elements such as sofas, chairs, tables, lamps, rugs, cushions, artwork, plants and \
                      curtains. Answer with a numbered list, one material per line, most prominent first. \
                      Each line is a one-line description of the material's visual character and its \
                      function in the space."
                .into(),
            extract_reformat: "Your previous answer could not be read as a list. Look at the image again and \
                               reply ONLY with a numbered list of up to ten construction material finishes, \
                               formatted as `1. <one-line description>`, one per line, with no other text. \
                               Do not include furniture or decor."
                .into(),
            match_material: "Match a material description from an interior image to one entry of a \
                             construction materials database.\n\n\
                             Examples:\n\
                             Description: pale honed stone panels cladding the feature wall\n\
                             Answer: Cladding, Limestone (per kg)\n\
                             Description: wide oiled hardwood boards on the terrace\n\
                             Answer: Decking, Hardwood (per m3)\n\n\
                             Candidates (answer with exactly one of these names, copied verbatim):\n\
                             {shortlist}\n\n\
                             Description: {description}\n\
                             Answer:"
                .into(),
            match_correction: "Your previous answer {previous} is not one of the candidate names. Answer \
                               with exactly one name copied verbatim from this list and nothing else:\n\
                               {shortlist}\n\n\
                               Description: {description}\n\
                               Answer:"
                .into(),
        }
    }
}

impl PromptTemplates {
    pub fn extract_request(&self, image_b64: &str, reformat: bool) -> BackendRequest {
        let instruction = if reformat { &self.extract_reformat } else { &self.extract };
        BackendRequest::new(
            BackendKind::VlmExtract,
            json!({
                "template_version": self.version,
                "attempt": if reformat { "reformat" } else { "initial" },
                "instruction": instruction,
                "image_b64": image_b64,
            }),
        )
    }

    pub fn match_request(
        &self,
        description: &str,
        shortlist: &[String],
        previous_answer: Option<&str>,
    ) -> BackendRequest {
        let listing = shortlist
            .iter()
            .map(|name| format!("- {name}"))
            .collect::<Vec<_>>()
            .join("\n");
        let (template, attempt) = match previous_answer {
            None => (&self.match_material, "initial"),
            Some(_) => (&self.match_correction, "correction"),
        };
        let prompt = template
            .replace("{shortlist}", &listing)
            .replace("{description}", description)
            .replace("{previous}", &format!("{:?}", previous_answer.unwrap_or_default()));
        BackendRequest::new(
            BackendKind::VlmMatch,
            json!({
                "template_version": self.version,
                "attempt": attempt,
                "prompt": prompt,
                "description": description,
                "shortlist": shortlist,
            }),
        )
    }
}

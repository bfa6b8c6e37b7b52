//! Generate an image with the mock text-to-image backend and list the
//! material finishes the (mock) vision-language model reports, including
//! what the furniture blocklist filtered out.
//!
//!     cargo run --example extract_materials -- "A bright kitchen with terrazzo floors"

use insightgen::gateway::{
    extract_materials, generate_image, BackendKind, ExtractionFilter, ImageOptions, MockImageBackend,
    PromptTemplates, ScriptedBackend,
};
use serde_json::json;

fn main() {
    let prompt = std::env::args().nth(1).unwrap_or_else(|| "A bright kitchen with terrazzo floors".into());
    let image = generate_image(&prompt, &MockImageBackend, &ImageOptions::default()).expect("mock image");
    println!("image {} ({} bytes, {})", image.image_id, image.bytes.len(), image.media_type.mime());

    // A scripted answer in the shape a real model tends to give, with a
    // furniture line the filter should drop.
    let vlm = ScriptedBackend::new("scripted:vlm");
    vlm.push(
        BackendKind::VlmExtract,
        Ok(json!({ "text": "Here are the materials I can see:\n\
            1. **Terrazzo floor** with white marble chips\n\
            2. Matte white lacquered cabinet fronts\n\
            3. Velvet bar stools\n\
            4. Brushed brass tap\n\
            5. Clear glass pendant shades" })),
    );
    let result = extract_materials(&image, &vlm, &PromptTemplates::default(), &ExtractionFilter::default())
        .expect("list parses");

    for d in &result.descriptions {
        println!("{:>2}. {}", d.source_rank, d.text);
    }
    for f in &result.filtered_out {
        println!("    dropped {:?}: {}", f.text, f.reason);
    }
    if result.shortfall {
        println!("only {} materials identified (fewer than ten)", result.descriptions.len());
    }
}

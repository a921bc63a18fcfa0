/// English name of a language code, falling back to the code itself.
pub fn language_name(code: &str) -> &str {
    match code {
        "en" => "English",
        "es" => "Spanish",
        "fr" => "French",
        "it" => "Italian",
        "de" => "German",
        "pt" => "Portuguese",
        "zh" => "Chinese",
        "ja" => "Japanese",
        other => other,
    }
}

//! Speech-like test material: voiced harmonic "words" and a small parallel
//! lexicon so every synthetic utterance has a transcript and a word-aligned
//! translation.

use std::f64::consts::PI;

use rand::Rng;

use crate::audio::SAMPLE_RATE;

/// Source characteristics of a synthetic talker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthVoice {
    /// Fundamental frequency in Hz.
    pub f0: f64,
    /// Two resonance centers in Hz shaping the harmonic envelope.
    pub formants: [f64; 2],
    /// Peak amplitude of the rendered utterance.
    pub peak: f64,
}

impl SynthVoice {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            f0: rng.random_range(95.0..230.0),
            formants: [rng.random_range(400.0..900.0), rng.random_range(1200.0..2600.0)],
            peak: 0.3,
        }
    }
}

const EDGE_PAD_S: f64 = 0.05;

/// Renders `n_words` voiced bursts (220-420 ms) separated by short pauses.
pub fn synth_utterance<R: Rng + ?Sized>(n_words: usize, voice: &SynthVoice, rng: &mut R) -> Vec<f64> {
    let rate = SAMPLE_RATE as f64;
    let pad = (EDGE_PAD_S * rate) as usize;
    let mut out = vec![0.0; pad];
    for w in 0..n_words {
        if w > 0 {
            let gap = (rng.random_range(0.06..0.15) * rate) as usize;
            out.extend(std::iter::repeat_n(0.0, gap));
        }
        let len = (rng.random_range(0.22..0.42) * rate) as usize;
        let f0 = voice.f0 * rng.random_range(0.9..1.1);
        let glide = rng.random_range(-0.15..0.15);
        let phase0: f64 = rng.random_range(0.0..2.0 * PI);
        let n_harm = ((4000.0 / f0) as usize).max(1);
        let weights: Vec<f64> = (1..=n_harm)
            .map(|k| {
                let f = k as f64 * f0;
                let res: f64 = voice
                    .formants
                    .iter()
                    .map(|&fc| 1.0 / (1.0 + ((f - fc) / 180.0).powi(2)))
                    .sum();
                (0.3 + res) / k as f64
            })
            .collect();
        let mut phase = phase0;
        for n in 0..len {
            let t = n as f64 / len as f64;
            let inst_f0 = f0 * (1.0 + glide * (t - 0.5));
            phase += 2.0 * PI * inst_f0 / rate;
            let env = (PI * t).sin().powf(0.6);
            let v: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, &a)| a * ((k + 1) as f64 * phase).sin())
                .sum();
            out.push(env * v);
        }
    }
    out.extend(std::iter::repeat_n(0.0, pad));
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = voice.peak / peak;
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

const LANGS: [&str; 5] = ["en", "es", "fr", "it", "de"];

// Row-aligned vocabulary: a sentence in one language translates word by word.
const ROWS: &[[&str; 5]] = &[
    ["hello", "hola", "bonjour", "ciao", "hallo"],
    ["world", "mundo", "monde", "mondo", "welt"],
    ["good", "bueno", "bon", "buono", "gut"],
    ["morning", "mañana", "matin", "mattina", "morgen"],
    ["friend", "amigo", "ami", "amico", "freund"],
    ["house", "casa", "maison", "casa", "haus"],
    ["water", "agua", "eau", "acqua", "wasser"],
    ["coffee", "café", "café", "caffè", "kaffee"],
    ["train", "tren", "train", "treno", "zug"],
    ["station", "estación", "gare", "stazione", "bahnhof"],
    ["city", "ciudad", "ville", "città", "stadt"],
    ["book", "libro", "livre", "libro", "buch"],
    ["table", "mesa", "table", "tavolo", "tisch"],
    ["window", "ventana", "fenêtre", "finestra", "fenster"],
    ["green", "verde", "vert", "verde", "grün"],
    ["blue", "azul", "bleu", "blu", "blau"],
    ["small", "pequeño", "petit", "piccolo", "klein"],
    ["large", "grande", "grand", "grande", "groß"],
    ["today", "hoy", "aujourd'hui", "oggi", "heute"],
    ["tomorrow", "mañana", "demain", "domani", "morgen"],
    ["where", "dónde", "où", "dove", "wo"],
    ["street", "calle", "rue", "strada", "straße"],
    ["music", "música", "musique", "musica", "musik"],
    ["market", "mercado", "marché", "mercato", "markt"],
    ["bread", "pan", "pain", "pane", "brot"],
    ["cheese", "queso", "fromage", "formaggio", "käse"],
    ["ticket", "billete", "billet", "biglietto", "fahrkarte"],
    ["museum", "museo", "musée", "museo", "museum"],
    ["garden", "jardín", "jardin", "giardino", "garten"],
    ["river", "río", "rivière", "fiume", "fluss"],
    ["mountain", "montaña", "montagne", "montagna", "berg"],
    ["evening", "tarde", "soir", "sera", "abend"],
    ["please", "porfavor", "svp", "perfavore", "bitte"],
    ["thanks", "gracias", "merci", "grazie", "danke"],
    ["doctor", "médico", "médecin", "medico", "arzt"],
    ["school", "escuela", "école", "scuola", "schule"],
    ["family", "familia", "famille", "famiglia", "familie"],
    ["dinner", "cena", "dîner", "cena", "abendessen"],
    ["weather", "tiempo", "météo", "meteo", "wetter"],
    ["airport", "aeropuerto", "aéroport", "aeroporto", "flughafen"],
];

/// Parallel word list used to generate transcripts and translations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lexicon;

impl Lexicon {
    pub fn languages() -> &'static [&'static str] {
        &LANGS
    }

    pub fn supports(lang: &str) -> bool {
        LANGS.contains(&lang)
    }

    /// All words of one language column, in row order.
    pub fn vocabulary(lang: &str) -> Vec<&'static str> {
        let col = LANGS.iter().position(|&x| x == lang).unwrap_or(0);
        ROWS.iter().map(|r| r[col]).collect()
    }

    /// Draws `n_words` rows and renders them in `lang`, plus the word-aligned
    /// rendering in `translate_to`. Unsupported languages fall back to English.
    pub fn sentence<R: Rng + ?Sized>(
        n_words: usize,
        lang: &str,
        translate_to: &str,
        rng: &mut R,
    ) -> (String, String) {
        let col = |l: &str| LANGS.iter().position(|&x| x == l).unwrap_or(0);
        let (src, tgt) = (col(lang), col(translate_to));
        let rows: Vec<usize> = (0..n_words).map(|_| rng.random_range(0..ROWS.len())).collect();
        let text = rows.iter().map(|&r| ROWS[r][src]).collect::<Vec<_>>().join(" ");
        let translation = rows.iter().map(|&r| ROWS[r][tgt]).collect::<Vec<_>>().join(" ");
        (text, translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn utterance_has_words_and_silence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let voice = SynthVoice::random(&mut rng);
        let x = synth_utterance(4, &voice, &mut rng);
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.3).abs() < 1e-12);
        let dur = x.len() as f64 / 16_000.0;
        assert!(dur > 4.0 * 0.22 && dur < 4.0 * 0.42 + 3.0 * 0.15 + 0.11, "{dur}");
        assert!(x[..400].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sentences_are_word_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (text, tr) = Lexicon::sentence(6, "en", "es", &mut rng);
        assert_eq!(text.split_whitespace().count(), 6);
        assert_eq!(tr.split_whitespace().count(), 6);
        assert!(Lexicon::supports("fr"));
        assert!(!Lexicon::supports("ja"));
    }
}

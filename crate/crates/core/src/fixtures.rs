//! Deterministic synthetic call corpora.
//!
//! Calls are rendered as speech surrogates: each utterance is a train of
//! harmonic "syllables" with a speaker-specific pitch, separated by short
//! gaps. Negative utterances can carry the sentiment in the audio (louder,
//! higher pitched, faster), in the words, or in both. Every call starts with
//! a recorded-message intro followed by a pause, so the files exercise the
//! whole segmentation path.
//!
//! Output layout:
//!
//! ```text
//! audio/<call_id>.wav
//! transcripts/<call_id>.json
//! truth.jsonl          one label event per utterance
//! manifest.json        spec, split, and per-utterance rendering
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::log::{write_label_log, LabelEvent};
use crate::corpus::store::write_atomic;
use crate::corpus::{utterance_id, Role};
use crate::error::{Error, Result};
use crate::ingest::wav::write_wav;
use crate::ingest::{TranscriptDoc, TranscriptRecord};
use crate::label::{LabelSource, Polarity, SentimentLabel};
use crate::seed;

pub const NEGATIVE_CUSTOMER: &[&str] = &[
    "your service is the worst",
    "i hate the system",
    "i am not following you",
    "i never received my card",
    "this is ridiculous i have been waiting forever",
    "i am really upset about these fees",
    "you people keep making mistakes on my account",
    "this is terrible i want to cancel",
    "i am so frustrated with this",
    "nobody ever calls me back",
    "that is unacceptable",
    "why is this so complicated",
    "i am angry that my payment was lost",
    "the app never works",
    "i was charged twice and that is wrong",
    "this is the third time i am calling about this",
    "i am disappointed with how this was handled",
    "that makes no sense at all",
    "stop wasting my time",
    "the website is awful",
];

pub const NEGATIVE_CSR: &[&str] = &[
    "i am sorry but i cannot help with that",
    "unfortunately the system is down right now",
    "i am unable to change that on my end",
    "that is not something we can do",
    "our system does not allow that",
    "i cannot access your account right now",
    "sorry there is nothing i can do about the fee",
    "unfortunately that request was denied",
];

pub const NEUTRAL_CUSTOMER: &[&str] = &[
    "i would like to check my balance",
    "can you tell me when my statement closes",
    "yes that is correct",
    "i want to update my address",
    "okay thank you",
    "i have a question about my last payment",
    "sure one moment",
    "i would like to make a payment",
    "can i set up automatic payments",
    "what is the due date on my account",
    "i just moved to a new apartment",
    "that sounds good",
    "could you repeat the last part",
    "i am calling about my credit limit",
    "alright that works for me",
    "i think that is everything",
];

pub const NEUTRAL_CSR: &[&str] = &[
    "let me look that up for you",
    "can i have your account number",
    "i can help you with that",
    "is there anything else i can help with",
    "thank you for your patience",
    "one moment please",
    "i have updated that for you",
    "you should see it in three to five days",
    "can you verify your date of birth",
    "i see the payment on your account",
    "your new card will arrive next week",
    "i will send you a confirmation email",
    "that change is now complete",
    "let me transfer you to the right team",
];

const GREETING: &str = "thank you for calling how can i help you";
const HOLD: &str = "please hold while i check that";
const NUMBERS: &[&str] = &["one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_calls: usize,
    pub sample_rate: u32,
    /// Seconds of conversation per call, before any hold.
    pub min_duration: f64,
    pub max_duration: f64,
    pub min_utterance: f64,
    pub max_utterance: f64,
    pub customer_neg_fraction: f64,
    pub csr_neg_fraction: f64,
    /// Share of negatives rendered with negative audio and neutral words.
    pub acoustic_only_fraction: f64,
    /// Share of negatives rendered with negative words and neutral audio.
    pub text_only_fraction: f64,
    /// Share of calls that escalate: a long hold and more negatives.
    pub escalated_fraction: f64,
    pub escalated_customer_neg_fraction: f64,
    pub escalated_csr_neg_fraction: f64,
    pub hold_seconds: f64,
    /// Probability of deleting each transcript token.
    pub token_dropout: f64,
    /// Share of calls held out for evaluation.
    pub test_fraction: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 42,
            n_calls: 20,
            sample_rate: 8000,
            min_duration: 90.0,
            max_duration: 180.0,
            min_utterance: 1.5,
            max_utterance: 6.0,
            customer_neg_fraction: 0.3,
            csr_neg_fraction: 0.1,
            acoustic_only_fraction: 0.2,
            text_only_fraction: 0.2,
            escalated_fraction: 0.15,
            escalated_customer_neg_fraction: 0.7,
            escalated_csr_neg_fraction: 0.3,
            hold_seconds: 540.0,
            token_dropout: 0.0,
            test_fraction: 0.3,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("customer_neg_fraction", self.customer_neg_fraction),
            ("csr_neg_fraction", self.csr_neg_fraction),
            ("acoustic_only_fraction", self.acoustic_only_fraction),
            ("text_only_fraction", self.text_only_fraction),
            ("escalated_fraction", self.escalated_fraction),
            ("escalated_customer_neg_fraction", self.escalated_customer_neg_fraction),
            ("escalated_csr_neg_fraction", self.escalated_csr_neg_fraction),
            ("token_dropout", self.token_dropout),
            ("test_fraction", self.test_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("fixture {name} must be in [0, 1], got {v}")));
            }
        }
        if self.acoustic_only_fraction + self.text_only_fraction > 1.0 {
            return Err(Error::invalid("acoustic-only and text-only fractions exceed 1"));
        }
        if self.n_calls == 0 {
            return Err(Error::invalid("fixture needs at least one call"));
        }
        if self.sample_rate < 4000 {
            return Err(Error::invalid("fixture sample rate must be at least 4000 Hz"));
        }
        if !(1.0 <= self.min_utterance && self.min_utterance <= self.max_utterance && self.max_utterance <= 20.0) {
            return Err(Error::invalid("need 1 <= min_utterance <= max_utterance <= 20"));
        }
        if !(self.min_utterance < self.min_duration && self.min_duration <= self.max_duration) {
            return Err(Error::invalid("need min_utterance < min_duration <= max_duration"));
        }
        if self.hold_seconds < 0.0 {
            return Err(Error::invalid("hold_seconds must be >= 0"));
        }
        Ok(())
    }

    pub fn call_id(&self, index: usize) -> String {
        format!("call{:04}", index)
    }
}

/// How an utterance's sentiment shows up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rendering {
    Neutral,
    /// Negative words and negative audio.
    Both,
    AcousticOnly,
    TextOnly,
}

impl Rendering {
    pub fn negative_audio(self) -> bool {
        matches!(self, Rendering::Both | Rendering::AcousticOnly)
    }

    pub fn negative_text(self) -> bool {
        matches!(self, Rendering::Both | Rendering::TextOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedUtterance {
    pub utterance_id: String,
    pub start: f64,
    pub end: f64,
    pub speaker_id: String,
    pub role: Role,
    pub text: String,
    pub truth: Polarity,
    pub rendering: Rendering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallPlan {
    pub call_id: String,
    pub duration: f64,
    pub escalated: bool,
    /// End of the recorded intro, before its pause.
    pub intro_end: f64,
    pub hold: Option<(f64, f64)>,
    pub utterances: Vec<PlannedUtterance>,
    csr_pitch: f64,
    customer_pitch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCall {
    pub plan: CallPlan,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl GeneratedCall {
    pub fn transcript(&self) -> TranscriptDoc {
        TranscriptDoc {
            call_id: self.plan.call_id.clone(),
            utterances: self
                .plan
                .utterances
                .iter()
                .map(|u| TranscriptRecord {
                    start_s: u.start,
                    end_s: u.end,
                    speaker_id: u.speaker_id.clone(),
                    text: u.text.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub spec: FixtureSpec,
    pub train_calls: Vec<String>,
    pub test_calls: Vec<String>,
    /// Training calls suited to seed annotation: the non-escalated ones, so
    /// the loop still has escalations to find.
    pub seed_calls: Vec<String>,
    pub calls: Vec<CallPlan>,
}

impl FixtureManifest {
    pub fn read(path: &Path) -> Result<Self> {
        crate::corpus::store::read_json(path)
    }

    pub fn utterances(&self) -> impl Iterator<Item = &PlannedUtterance> {
        self.calls.iter().flat_map(|c| c.utterances.iter())
    }
}

fn ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn pick<'a>(rng: &mut ChaCha8Rng, bank: &[&'a str]) -> &'a str {
    bank[rng.random_range(0..bank.len())]
}

fn neutral_text(rng: &mut ChaCha8Rng, role: Role) -> String {
    if role == Role::Customer && rng.random_bool(0.15) {
        let digits: Vec<&str> = (0..4).map(|_| pick(rng, NUMBERS)).collect();
        return format!("my account number ends in {}", digits.join(" "));
    }
    let bank = if role == Role::Csr { NEUTRAL_CSR } else { NEUTRAL_CUSTOMER };
    pick(rng, bank).to_string()
}

fn negative_text(rng: &mut ChaCha8Rng, role: Role) -> String {
    let bank = if role == Role::Csr { NEGATIVE_CSR } else { NEGATIVE_CUSTOMER };
    let first = pick(rng, bank);
    if rng.random_bool(0.3) {
        format!("{first} {}", pick(rng, bank))
    } else {
        first.to_string()
    }
}

fn drop_tokens(rng: &mut ChaCha8Rng, text: &str, p: f64) -> String {
    if p == 0.0 {
        return text.to_string();
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let kept: Vec<&str> = tokens.iter().copied().filter(|_| !rng.random_bool(p)).collect();
    if kept.is_empty() {
        tokens[0].to_string()
    } else {
        kept.join(" ")
    }
}

/// Marks `round(fraction * n)` of `n` slots, chosen at random.
fn choose(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<bool> {
    let k = (fraction * n as f64).round() as usize;
    let mut marks: Vec<bool> = (0..n).map(|i| i < k).collect();
    marks.shuffle(rng);
    marks
}

const INTRO_SECONDS: f64 = 2.5;
const INTRO_PAUSE: f64 = 1.6;

/// Lays out one call: timing, speakers, truth, renderings, and words.
pub fn plan_call(spec: &FixtureSpec, index: usize) -> CallPlan {
    let call_id = spec.call_id(index);
    let mut rng = seed::rng(&[spec.seed, index as u64, 0]);
    let escalated = escalated_calls(spec)[index];
    let target = rng.random_range(spec.min_duration..=spec.max_duration);
    let (csr_spk, cust_spk) = if rng.random_bool(0.5) { ("spk_a", "spk_b") } else { ("spk_b", "spk_a") };

    let mut roles = vec![Role::Csr];
    let mut spoken = 0.0;
    while spoken < target {
        spoken += 0.5 * (spec.min_utterance + spec.max_utterance) + 0.6;
        let last = *roles.last().unwrap();
        let next = if rng.random_bool(0.85) {
            if last == Role::Csr { Role::Customer } else { Role::Csr }
        } else {
            last
        };
        roles.push(next);
    }
    let hold_after = (escalated && spec.hold_seconds > 0.0 && roles.len() > 4).then(|| {
        let i = rng.random_range(2..roles.len() - 2);
        roles[i] = Role::Csr;
        i
    });

    let (cust_frac, csr_frac) = if escalated {
        (spec.escalated_customer_neg_fraction, spec.escalated_csr_neg_fraction)
    } else {
        (spec.customer_neg_fraction, spec.csr_neg_fraction)
    };
    // The greeting and the hold notice stay neutral.
    let fixed = |i: usize| i == 0 || Some(i) == hold_after;
    let cust_slots: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Customer).collect();
    let csr_slots: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Role::Csr && !fixed(i)).collect();
    let mut negative = vec![false; roles.len()];
    for (slots, frac) in [(&cust_slots, cust_frac), (&csr_slots, csr_frac)] {
        for (&i, mark) in slots.iter().zip(choose(&mut rng, slots.len(), frac)) {
            negative[i] = mark;
        }
    }

    let mut t = INTRO_SECONDS + INTRO_PAUSE + rng.random_range(0.0..0.3);
    let intro_end = INTRO_SECONDS;
    let mut hold = None;
    let mut utterances = Vec::with_capacity(roles.len());
    for (i, &role) in roles.iter().enumerate() {
        let rendering = if !negative[i] {
            Rendering::Neutral
        } else {
            let u: f64 = rng.random();
            if u < spec.acoustic_only_fraction {
                Rendering::AcousticOnly
            } else if u < spec.acoustic_only_fraction + spec.text_only_fraction {
                Rendering::TextOnly
            } else {
                Rendering::Both
            }
        };
        let text = if i == 0 {
            GREETING.to_string()
        } else if Some(i) == hold_after {
            HOLD.to_string()
        } else if rendering.negative_text() {
            negative_text(&mut rng, role)
        } else {
            neutral_text(&mut rng, role)
        };
        let text = if i == 0 { text } else { drop_tokens(&mut rng, &text, spec.token_dropout) };
        let len = rng.random_range(spec.min_utterance..=spec.max_utterance);
        let start = ms(t);
        let end = ms(t + len);
        utterances.push(PlannedUtterance {
            utterance_id: utterance_id(&call_id, start, end),
            start,
            end,
            speaker_id: if role == Role::Csr { csr_spk } else { cust_spk }.to_string(),
            role,
            text,
            truth: if negative[i] { Polarity::Negative } else { Polarity::Nonnegative },
            rendering,
        });
        let gap = if rendering.negative_audio() {
            rng.random_range(0.45..0.6)
        } else {
            rng.random_range(0.55..0.9)
        };
        t = end + gap;
        if Some(i) == hold_after {
            hold = Some((ms(t), ms(t + spec.hold_seconds)));
            t += spec.hold_seconds + 0.5;
        }
    }
    CallPlan {
        call_id,
        duration: ms(t + 0.5),
        escalated,
        intro_end,
        hold,
        utterances,
        csr_pitch: rng.random_range(170.0..230.0),
        customer_pitch: rng.random_range(95.0..150.0),
    }
}

fn escalated_calls(spec: &FixtureSpec) -> Vec<bool> {
    let mut rng = seed::rng(&[spec.seed, u64::MAX]);
    choose(&mut rng, spec.n_calls, spec.escalated_fraction)
}

/// Neutral syllable peak amplitude; negative audio doubles it (+6 dB).
const BASE_AMPLITUDE: f64 = 0.12;
const NOISE_FLOOR: f64 = 1e-4;

struct Voice {
    pitch: f64,
    amplitude: f64,
    min_gap: f64,
    max_gap: f64,
}

impl Voice {
    fn new(base_pitch: f64, negative: bool) -> Self {
        if negative {
            Voice { pitch: base_pitch * 1.3, amplitude: BASE_AMPLITUDE * 2.0, min_gap: 0.03, max_gap: 0.07 }
        } else {
            Voice { pitch: base_pitch, amplitude: BASE_AMPLITUDE, min_gap: 0.06, max_gap: 0.14 }
        }
    }
}

/// Adds one harmonic syllable at `[start, start + len)` samples.
fn syllable(out: &mut [f64], sr: f64, start: usize, len: usize, f0: f64, amplitude: f64, rng: &mut ChaCha8Rng) {
    let ramp = ((0.015 * sr) as usize).min(len / 2).max(1);
    let glide: f64 = rng.random_range(-0.05..0.05);
    let harmonics = ((3400.0 / (f0 * (1.0 + glide.abs()))) as usize).clamp(1, 8);
    let norm: f64 = (1..=harmonics).map(|k| 1.0 / k as f64).sum();
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    let mut phase = rng.random_range(0.0..2.0 * PI);
    for i in 0..len {
        let frac = i as f64 / len as f64;
        let f = f0 * (1.0 + glide * frac);
        phase += 2.0 * PI * f / sr;
        let env = if i < ramp {
            0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos()
        } else if i >= len - ramp {
            0.5 - 0.5 * (PI * (len - 1 - i) as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        let tone: f64 = (1..=harmonics).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>() / norm;
        out[start + i] += amplitude * env * (tone + noise.sample(rng));
    }
}

/// Fills `[start, end)` seconds with syllables, the first starting at
/// `start` and the last ending at `end`.
fn speak(out: &mut [f64], sr: f64, start: f64, end: f64, voice: &Voice, rng: &mut ChaCha8Rng) {
    let mut pieces = Vec::new();
    let mut total = 0.0;
    loop {
        let syl = rng.random_range(0.12..0.25);
        pieces.push(syl);
        total += syl;
        if total >= end - start {
            break;
        }
        let gap = rng.random_range(voice.min_gap..voice.max_gap);
        pieces.push(-gap);
        total += gap;
    }
    let scale = (end - start) / total;
    let s0 = (start * sr).round() as usize;
    let s1 = (end * sr).round() as usize;
    let mut t = start;
    for p in pieces {
        let d = p.abs() * scale;
        if p > 0.0 {
            let a = ((t * sr).round() as usize).max(s0);
            let b = (((t + d) * sr).round() as usize).min(s1);
            if b > a {
                let f0 = voice.pitch * rng.random_range(0.92..1.08);
                let amp = voice.amplitude * rng.random_range(0.85..1.0);
                syllable(out, sr, a, b - a, f0, amp, rng);
            }
        }
        t += d;
    }
}

/// Renders a planned call to samples.
pub fn render_call(spec: &FixtureSpec, plan: &CallPlan, index: usize) -> Vec<f64> {
    let sr = spec.sample_rate as f64;
    let n = (plan.duration * sr).round() as usize;
    let mut rng = seed::rng(&[spec.seed, index as u64, 1]);
    let floor = Normal::new(0.0, NOISE_FLOOR).expect("valid sigma");
    let mut out: Vec<f64> = (0..n).map(|_| floor.sample(&mut rng)).collect();

    let robot = Voice { pitch: 330.0, amplitude: 0.08, min_gap: 0.02, max_gap: 0.05 };
    speak(&mut out, sr, 0.0, plan.intro_end, &robot, &mut rng);
    for u in &plan.utterances {
        let base = if u.role == Role::Csr { plan.csr_pitch } else { plan.customer_pitch };
        let voice = Voice::new(base, u.rendering.negative_audio());
        speak(&mut out, sr, u.start, u.end, &voice, &mut rng);
    }
    for x in &mut out {
        *x = x.clamp(-1.0, 1.0);
    }
    out
}

pub fn generate_call(spec: &FixtureSpec, index: usize) -> GeneratedCall {
    let plan = plan_call(spec, index);
    let samples = render_call(spec, &plan, index);
    GeneratedCall { plan, samples, sample_rate: spec.sample_rate }
}

/// Train/test split of the call ids.
pub fn split(spec: &FixtureSpec) -> (Vec<String>, Vec<String>) {
    let mut rng = seed::rng(&[spec.seed, u64::MAX - 1]);
    let test = choose(&mut rng, spec.n_calls, spec.test_fraction);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, t) in test.into_iter().enumerate() {
        (if t { &mut held } else { &mut train }).push(spec.call_id(i));
    }
    (train, held)
}

/// Ground truth for every planned utterance, as label events.
pub fn truth_events(plans: &[CallPlan]) -> Vec<LabelEvent> {
    let epoch = DateTime::<Utc>::UNIX_EPOCH;
    plans
        .iter()
        .flat_map(|c| c.utterances.iter())
        .map(|u| LabelEvent {
            timestamp: epoch,
            utterance_id: u.utterance_id.clone(),
            label: SentimentLabel::from(u.truth),
            source: LabelSource::SeedHuman,
            iteration: 0,
        })
        .collect()
}

/// Writes a complete fixture corpus under `out`.
pub fn generate(spec: &FixtureSpec, out: &Path) -> Result<FixtureManifest> {
    spec.validate()?;
    let audio_dir = out.join("audio");
    let transcript_dir = out.join("transcripts");
    for dir in [&audio_dir, &transcript_dir] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let plans: Vec<CallPlan> = (0..spec.n_calls)
        .into_par_iter()
        .map(|i| -> Result<CallPlan> {
            let call = generate_call(spec, i);
            let id = &call.plan.call_id;
            write_wav(&audio_dir.join(format!("{id}.wav")), &call.samples, call.sample_rate)?;
            call.transcript().write(&transcript_dir.join(format!("{id}.json")))?;
            Ok(call.plan)
        })
        .collect::<Result<_>>()?;
    write_label_log(&out.join("truth.jsonl"), &truth_events(&plans))?;
    let (train_calls, test_calls) = split(spec);
    let seed_calls = train_calls
        .iter()
        .filter(|id| plans.iter().any(|p| &p.call_id == *id && !p.escalated))
        .cloned()
        .collect();
    let manifest = FixtureManifest { spec: spec.clone(), train_calls, test_calls, seed_calls, calls: plans };
    write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

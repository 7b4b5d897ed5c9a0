//! Parametric application traffic generators and the built-in class catalogue.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{Direction, QosClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    /// Periodic rate swings, as adaptive video fetches segments.
    Sinusoidal,
    /// A single rise-and-fall envelope across each period.
    Convex,
    /// Flat rate, optionally drifting by `trend`.
    Linear,
    /// Large initial page load decaying geometrically, plus sparse interaction bursts.
    BurstyDecay,
}

/// Per-direction generator parameters. Rates are bytes per subframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionParams {
    pub base_rate: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Cycle length in subframes (Sinusoidal, Convex) or decay scale (BurstyDecay).
    #[serde(default = "default_period")]
    pub period: u32,
    #[serde(default)]
    pub noise_std: f64,
    /// Linear drift in bytes per subframe per subframe.
    #[serde(default)]
    pub trend: f64,
    /// Resource blocks granted every subframe when the QoS class is GBR.
    #[serde(default)]
    pub persistent_rbs: u32,
}

fn default_period() -> u32 {
    1000
}

impl DirectionParams {
    pub fn flat(base_rate: f64) -> Self {
        Self {
            base_rate,
            amplitude: 0.0,
            period: default_period(),
            noise_std: 0.0,
            trend: 0.0,
            persistent_rbs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub class_label: String,
    pub shape: Shape,
    pub uplink: DirectionParams,
    pub downlink: DirectionParams,
    pub qos: QosClass,
}

impl AppProfile {
    pub fn params(&self, direction: Direction) -> &DirectionParams {
        match direction {
            Direction::Uplink => &self.uplink,
            Direction::Downlink => &self.downlink,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.qos.validate()?;
        for dir in Direction::BOTH {
            let p = self.params(dir);
            let field = |f: &str| format!("profile {:?} {dir}.{f}", self.class_label);
            if !(p.base_rate.is_finite() && p.base_rate >= 0.0) {
                return Err(Error::Config(format!("{} must be finite and >= 0", field("base_rate"))));
            }
            if !(p.amplitude.is_finite() && p.noise_std.is_finite() && p.noise_std >= 0.0 && p.trend.is_finite()) {
                return Err(Error::Config(format!("{} parameters must be finite", field("shape"))));
            }
            if p.period < 2 && self.shape != Shape::Linear {
                return Err(Error::Config(format!("{} must be >= 2", field("period"))));
            }
            if self.qos.is_gbr() && p.persistent_rbs == 0 {
                return Err(Error::Config(format!("{} must be positive for a GBR class", field("persistent_rbs"))));
            }
        }
        Ok(())
    }

    /// A copy with rates and periods scaled by independent factors in
    /// `[1 - spread, 1 + spread]`, modelling iteration-to-iteration variation.
    /// Persistent grants are left untouched.
    pub fn jittered<R: Rng>(&self, rng: &mut R, spread: f64) -> Self {
        let mut out = self.clone();
        for p in [&mut out.uplink, &mut out.downlink] {
            let mut f = || 1.0 + rng.gen_range(-spread..=spread);
            p.base_rate *= f();
            p.amplitude *= f();
            p.period = ((f64::from(p.period) * f()).round() as u32).max(2);
        }
        out
    }
}

/// Bytes arriving in the MAC queue for `direction` at `subframe`.
///
/// Consumes exactly one normal draw per call, plus one uniform draw for
/// [`Shape::BurstyDecay`], so streams stay aligned across shapes.
pub fn generate_arrivals<R: Rng>(profile: &AppProfile, direction: Direction, subframe: u64, rng: &mut R) -> u64 {
    let p = profile.params(direction);
    let t = subframe as f64;
    let period = f64::from(p.period.max(1));
    let noise = if p.noise_std > 0.0 {
        Normal::new(0.0, p.noise_std).expect("noise_std validated").sample(rng)
    } else {
        0.0
    };
    let deterministic = match profile.shape {
        Shape::Sinusoidal => p.base_rate + p.amplitude * (2.0 * PI * t / period).sin(),
        Shape::Convex => {
            let u = (t % period) / period;
            p.base_rate + p.amplitude * 4.0 * u * (1.0 - u)
        }
        Shape::Linear => p.base_rate,
        Shape::BurstyDecay => {
            let half_life = period / 4.0;
            let burst = if rng.gen::<f64>() < 16.0 / period { p.amplitude / 2.0 } else { 0.0 };
            p.base_rate + p.amplitude * 0.5f64.powf(t / half_life) + burst
        }
    };
    let value = deterministic + p.trend * t + noise;
    if value > 0.0 {
        value.round() as u64
    } else {
        0
    }
}

fn sinus(base: f64, amplitude: f64, period: u32, noise_std: f64) -> DirectionParams {
    DirectionParams {
        base_rate: base,
        amplitude,
        period,
        noise_std,
        trend: 0.0,
        persistent_rbs: 0,
    }
}

fn gbr(arrival: f64, noise_std: f64, persistent_rbs: u32) -> DirectionParams {
    DirectionParams {
        noise_std,
        persistent_rbs,
        ..DirectionParams::flat(arrival)
    }
}

fn profile(label: &str, shape: Shape, qos: QosClass, uplink: DirectionParams, downlink: DirectionParams) -> AppProfile {
    AppProfile {
        class_label: label.to_string(),
        shape,
        uplink,
        downlink,
        qos,
    }
}

/// The 22 built-in application/activity classes.
///
/// Magnitudes are synthetic; they are chosen so that the documented orderings
/// hold: Amazon highest and Target lowest among shops, non-live above live
/// and FHD > HD > SD for video, Apple TV+ highest among OTT, uplink above
/// downlink for the talking side of a call. Calls are GBR with persistent
/// grants sized for the default cell (4 RBs per group).
pub fn catalogue() -> Vec<AppProfile> {
    use Shape::*;
    let browse = QosClass::browsing;
    let buffered = QosClass::buffered_streaming;
    let live = QosClass::live_streaming;
    let voice = QosClass::conversational_voice;
    let video = QosClass::conversational_video;

    let shop = |label: &str, dl: (f64, f64, u32, f64), ul: (f64, f64, f64)| {
        profile(
            label,
            BurstyDecay,
            browse(),
            DirectionParams {
                base_rate: ul.0,
                amplitude: ul.1,
                period: dl.2,
                noise_std: ul.2,
                trend: 0.0,
                persistent_rbs: 0,
            },
            DirectionParams {
                base_rate: dl.0,
                amplitude: dl.1,
                period: dl.2,
                noise_std: dl.3,
                trend: 0.0,
                persistent_rbs: 0,
            },
        )
    };
    let call = |label: &str, qos: QosClass, ul: (f64, u32), dl: (f64, u32)| {
        profile(label, Linear, qos, gbr(ul.0, ul.0 * 0.3, ul.1), gbr(dl.0, dl.0 * 0.1, dl.1))
    };
    let youtube = |label: &str, qos: QosClass, dl: (f64, f64, u32, f64), ul: f64| {
        profile(label, Sinusoidal, qos, sinus(ul, ul * 0.2, dl.2, ul * 0.3), sinus(dl.0, dl.1, dl.2, dl.3))
    };
    let ott = |label: &str, dl: (f64, f64, f64), ul: (f64, f64)| {
        let period = 30_000;
        profile(
            label,
            Convex,
            buffered(),
            DirectionParams {
                base_rate: ul.0,
                amplitude: ul.1,
                period,
                noise_std: ul.0 * 0.3,
                trend: 0.0,
                persistent_rbs: 0,
            },
            DirectionParams {
                base_rate: dl.0,
                amplitude: dl.1,
                period,
                noise_std: dl.2,
                trend: 0.0,
                persistent_rbs: 0,
            },
        )
    };

    vec![
        shop("shop-amazon", (900.0, 7000.0, 8000, 300.0), (500.0, 1500.0, 150.0)),
        shop("shop-ebay", (700.0, 5200.0, 6000, 250.0), (380.0, 1100.0, 120.0)),
        shop("shop-etsy", (550.0, 3800.0, 5000, 200.0), (300.0, 800.0, 60.0)),
        shop("shop-target", (420.0, 2800.0, 4000, 200.0), (260.0, 600.0, 160.0)),
        call("voice-messenger", voice(), (300.0, 16), (100.0, 4)),
        call("voice-telegram", voice(), (250.0, 12), (100.0, 4)),
        call("voice-whatsapp", voice(), (200.0, 8), (90.0, 4)),
        call("voice-zoom", voice(), (350.0, 20), (150.0, 8)),
        call("voice-zoom-callee", voice(), (150.0, 8), (350.0, 16)),
        call("video-messenger", video(), (1800.0, 24), (900.0, 12)),
        call("video-telegram", video(), (2600.0, 32), (1500.0, 20)),
        call("video-whatsapp", video(), (1500.0, 20), (900.0, 12)),
        call("video-zoom", video(), (2200.0, 28), (1200.0, 16)),
        youtube("youtube-live-sd", live(), (900.0, 250.0, 2000, 150.0), 120.0),
        youtube("youtube-live-hd", live(), (1600.0, 450.0, 2000, 200.0), 140.0),
        youtube("youtube-live-fhd", live(), (2600.0, 700.0, 2000, 250.0), 160.0),
        youtube("youtube-vod-sd", buffered(), (1300.0, 1000.0, 6000, 250.0), 120.0),
        youtube("youtube-vod-hd", buffered(), (2300.0, 1800.0, 6000, 300.0), 140.0),
        youtube("youtube-vod-fhd", buffered(), (3600.0, 2900.0, 6000, 350.0), 160.0),
        ott("ott-appletv", (1500.0, 5000.0, 400.0), (250.0, 150.0)),
        ott("ott-prime", (1000.0, 3500.0, 300.0), (200.0, 100.0)),
        ott("ott-netflix", (800.0, 2800.0, 250.0), (150.0, 80.0)),
    ]
}

pub fn find(label: &str) -> Option<AppProfile> {
    catalogue().into_iter().find(|p| p.class_label == label)
}

//! Sensor networks: ordered station lists with per-station fidelity offsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// One seismic station: a location plus an additive SNR offset capturing
/// instrument fidelity (0 = nominal; positive = higher-fidelity site).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    /// Station location.
    #[serde(flatten)]
    pub loc: GeoPoint,
    /// Additive signal-to-noise offset for this site.
    #[serde(default)]
    pub snr_offset: f64,
}

/// An ordered set of stations. Order matters: detection vectors, arrival
/// vectors, and CSV outputs all index stations by their position here.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorNetwork {
    /// The stations, in index order.
    pub stations: Vec<Station>,
}

impl SensorNetwork {
    /// Builds a network, validating station coordinates and offsets.
    pub fn new(stations: Vec<Station>) -> Result<Self> {
        for (i, s) in stations.iter().enumerate() {
            GeoPoint::new(s.loc.lat, s.loc.lon)?;
            if !s.snr_offset.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "station {i} has non-finite snr_offset"
                )));
            }
        }
        Ok(Self { stations })
    }

    /// Number of stations.
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    /// True when the network has no stations.
    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// A copy of this network with one extra station appended.
    ///
    /// Appending (rather than inserting) keeps existing station indices —
    /// and therefore their Monte Carlo streams — stable, which is what
    /// gives candidate networks common random numbers during placement.
    pub fn with_station(&self, loc: GeoPoint, snr_offset: f64) -> Self {
        let mut stations = self.stations.clone();
        stations.push(Station { loc, snr_offset });
        Self { stations }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

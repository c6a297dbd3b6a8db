//! Principal-symbol calculus along bicharacteristics and the three-wave interaction measurement.

mod bicharacteristic;
mod flowout;
mod interaction;
mod measurement;
mod symbols;

pub use bicharacteristic::{hamiltonian, integrate_bicharacteristic, BicharSample, Bicharacteristic, TOL_HAM};
pub use flowout::{flowout_disjointness, segment_distance, FlowoutOptions};
pub use interaction::{
    build_interaction_geometry, causally_precedes, interaction_symbol, InteractionGeometry, InteractionOptions,
    PERMUTATIONS,
};
pub use measurement::{
    measurement_operator, random_polarizations, simulated_measurement, MeasurementMode, MeasurementOperator, MeasurementOptions,
    MeasurementScalar,
};
pub use symbols::{
    symbol_propagator, transport_symbol, volume_factor, volume_factor_between, wave_symbols, HalfDensity, SymbolState,
};

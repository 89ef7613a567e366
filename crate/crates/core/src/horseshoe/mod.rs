//! Fixed points of the return map near the saddle, the slabs and slices of
//! the horseshoe, Conley–Moser checks and the finite-depth conjugacy with the
//! shift on four symbols.

mod chain;
mod conley;
mod family;
mod slab;
mod slices;
mod symbols;

pub use chain::{chart_map, solve_chain, solve_periodic_chain, ChainSolution};
pub use conley::{
    conjugacy_residual, count_periodic_orbits, itinerary_to_point, verify_conley_moser, CmReport,
    ItineraryPoint, PeriodicCount, PeriodicOrbit, DEFAULT_LEVELS, DEFAULT_SAMPLE_BUDGET,
};
pub use family::{
    fixed_point_family, hat_distance, refine_fixed_point, FamilyEntry, FixedPointFamily,
    RefinedFixedPoint,
};
pub use slab::{build_slabs, SlabKind, SlabSet, UNSTABLE_DIM};
pub use slices::{compute_slices, select_l, unstable_targets, write_slices_csv, SliceFamily, SliceInfo};
pub use symbols::{shift_map, Symbol, SymbolSequence};

#[cfg(test)]
pub(crate) mod fixture {
    use std::sync::OnceLock;

    use super::*;
    use crate::canonical;
    use crate::global_map::{compose_p, PoincareMap};

    pub struct Fixture {
        pub map: PoincareMap,
        pub family: FixedPointFamily,
        pub slices: SliceFamily,
        pub report: CmReport,
    }

    /// Canonical instance at the auto-selected slab, computed once.
    pub fn canonical() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let inst = canonical::instance();
            let map = compose_p(inst.model.clone(), inst.eta, inst.rates.clone(), true).unwrap();
            let family = fixed_point_family(&inst.model, &inst.rates, inst.eta, canonical::X0_STAR, 0..=20).unwrap();
            let slices = select_l(&map, &family, 64, 1..=8).unwrap();
            let report = verify_conley_moser(&map, &slices, DEFAULT_SAMPLE_BUDGET, DEFAULT_LEVELS).unwrap();
            Fixture { map, family, slices, report }
        })
    }
}

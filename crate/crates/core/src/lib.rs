//! Filament growth in a two-dimensional memristor lattice driven by a discrete
//! quantum walk, with conductance from a tight-binding Green's function model.

pub mod cli;
pub mod config;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod negf;
pub mod potential;
pub mod sweep;
pub mod walk;

//! Co-design of intermodal mobility systems with automated vehicles.
//!
//! A mobility system is described by a multilayer network (road, walking and
//! transit layers), a set of travel requests and catalogs of vehicle and
//! subway options. Each design (vehicle speed, fleet size, subway service
//! level) is evaluated with a multi-commodity minimum-cost flow, and the
//! designs that are minimal in cost, travel time and emissions form a Pareto
//! antichain.

pub mod design;
pub mod engine;
pub mod flow;
pub mod lp;
pub mod network;
pub mod poset;
pub mod report;
pub mod scenario;
pub mod units;

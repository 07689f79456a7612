//! Experiment harness for the megabike simulator.

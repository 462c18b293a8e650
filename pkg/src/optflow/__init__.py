"""Simulator and verification toolkit for projection-based optimal consensus
under time-varying communication graphs.

Modules:
    convexsets  -- set representations, projectors, intersection oracle, hulls
    topology    -- switching digraph signals and connectivity certification
    dynamics    -- the consensus+projection flow and its integrator
    metrics     -- distance/spread observables and invariant checks
    scenario    -- experiment schema, validation, reference generators
    suites      -- the named verification suites
    cli         -- `optflow run|certify|suite|gen`
"""

__version__ = "0.1.0"

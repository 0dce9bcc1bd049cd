"""Two-stream instability in paraxial fluids of light.

Modules: :mod:`scales` (optical -> fluid units), :mod:`dispersion`
(linear stability), :mod:`solver` (split-step NLS), :mod:`diagnostics`,
:mod:`vapor` (two-level atomic medium) and :mod:`cli`.
"""
__version__ = "0.1.0"

"""Conservative solutions of the Camassa-Holm equation and peakon diagnostics.

Modules: ``measures`` (profiles, energy measures, norms), ``lagrangian``
(the change of variables and its inverse), ``evolution`` (the Lagrangian
system and RK4), ``conserved`` (E~, F~, weak residuals), ``stability``
(peakon distance and the lemma checks), ``scenarios`` (initial data and the
multipeakon oracle), ``io`` and ``cli``.
"""
__version__ = "0.1.0"

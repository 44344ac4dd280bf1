"""Discrete-event simulator for wavelength-routed WDM networks.

The package is organized around six building blocks:

* :mod:`wdmsim.topology` -- random network generation and candidate routes
* :mod:`wdmsim.traffic` -- CBR / exponential session demand generation
* :mod:`wdmsim.conversion` -- wavelength converter capability and placement
* :mod:`wdmsim.rwa` -- routing and wavelength assignment on live state
* :mod:`wdmsim.engine` -- the event loop, metrics, and the Erlang-B oracle
* :mod:`wdmsim.experiment` -- parameter sweeps, knee analysis, plot data

A FastAPI service (:mod:`wdmsim.service`) exposes the same operations over
HTTP and the ``wdmsim`` CLI is a thin client of that service.
"""

__version__ = "0.1.0"

"""Traffic signal control toolkit: lane-queue simulator, pressure/critic
controllers, debate-style deliberation and priority-weighted data curation."""

__version__ = "0.1.0"

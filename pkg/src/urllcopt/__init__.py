"""Joint uplink/downlink bandwidth and latency-budget optimizer for URLLC."""

__version__ = "0.1.0"

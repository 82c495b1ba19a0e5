"""sentrysim: a desk-scale physical threat monitoring stack over a simulated building.

A deterministic building simulator exposes virtual PTZ cameras (HTTP),
sensors (WebSocket push), and a remote action API. A monitoring pipeline
(device gateway, ordered event broker, visual analytics, rule engine, alarm
service) turns device output into operator alarms.
"""

__version__ = "0.1.0"

"""plumewatch: community air-quality monitoring backend.

Timelapse tile pyramids, sharable animated smoke images, background-subtraction
smoke detection, PM2.5/wind/smell telemetry, access-log usage analytics, and
survey statistics, behind one HTTP gateway and CLI.
"""

__version__ = "0.1.0"

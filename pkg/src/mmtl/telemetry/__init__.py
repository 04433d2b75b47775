from mmtl.telemetry.collectors import host_info

__all__ = ["host_info"]

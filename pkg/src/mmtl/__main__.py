"""Allow running as python -m mmtl."""
from mmtl.cli import run
run()

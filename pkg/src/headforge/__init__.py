"""headforge: synthetic head-video dataset pipeline.

Turns per-frame head-mesh sequences plus facial UV textures into multi-view
rendered clip datasets: OBJ sequence ingestion, texture sampling, a software
rasterizer, a coordinator/worker render farm, manifest building with
stratified subject-level splits, and binary pain-classification metrics.
"""

__version__ = "0.1.0"

"""Road-following local navigation from OSM graphs and 3D LiDAR using naive valley paths."""
__version__ = "0.1.0"

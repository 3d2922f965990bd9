"""Pipeline package: config -> curves / oracle / readout phases -> CSV, SVG, JSON summaries."""

# Reproduction nodes: each module exports NODES = {run: [deps]}

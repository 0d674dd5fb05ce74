# Nodes of the protection cycle

# LangGraph pipeline for the pump / code / error / decode / project cycle

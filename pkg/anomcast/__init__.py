#%%
__author__ = "anomcast contributors"
__version__ = "0.1.0"

from .lstm import SentimentLstm
from .config import ExperimentConfig, load_config
# %%

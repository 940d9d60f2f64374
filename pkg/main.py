# %%

import tempfile

import matplotlib.pyplot as plt

import anomcast
from anomcast.arima import detection_fit
from anomcast.config import load_config
from anomcast.lstm import TrainConfig
from anomcast.outliers import flag_outliers, year_residuals
from anomcast.pipeline import ingest, load_detection, run_experiment
from anomcast.sample import generate_sample
from anomcast.visualize import visualize_outliers

# %% Synthetic sample

root = tempfile.mkdtemp(prefix="anomcast-")
path = generate_sample(root, seed=0, symbols=5)
config = load_config(path).replace(sarimax_max_sum=1, sarimax_max_seasonal_sum=0, epochs=(10, 100))
data = ingest(config)

# %% Outlier detection on one symbol

prices = data["UAL"].prices
model, year = detection_fit(prices, config.training_year, config.fallback_year)
print(model)
flags = flag_outliers(year_residuals(model, prices, config.test_year))
visualize_outliers(prices, flags, config.test_year)
plt.show()

# %% Full experiment

report = run_experiment(config, progress=True)
for cell in report.cells:
    print(cell.model, cell.scale, round(cell.accuracy, 3), round(cell.seconds, 2))
print(report.cost_ratios())

# %% Standalone network

train, test = load_detection(config)
windows = [w for ws in train.values() for w in ws]
T = anomcast.SentimentLstm(backend="numpy", seed=0)
T.fit(windows, TrainConfig(epochs=50), progress=True)
print(T)
T.visualize_loss()
plt.show()

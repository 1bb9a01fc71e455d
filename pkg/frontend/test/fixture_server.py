"""Boot the classification service with a seeded debug model for the
console integration tests. Usage: fixture_server.py PORT WORK_DIR"""
import sys
from pathlib import Path

import numpy as np
import uvicorn
from PIL import Image

from lesionpipe.config import PipelineConfig, ServeSettings, TrainSettings
from lesionpipe.metrics import evaluate
from lesionpipe.nn import build_network, save_weights, small_config
from lesionpipe.pipeline import Registry
from lesionpipe.serve import create_app
from lesionpipe.synthetic import make_blob_image


def main() -> None:
    port = int(sys.argv[1])
    work = Path(sys.argv[2])
    console_dist = Path(__file__).resolve().parent.parent / "dist"

    config = PipelineConfig(
        data_dir=work / "svc",
        train=TrainSettings(arch="small", input_shape=(3, 16, 16)),
        serve=ServeSettings(port=port, console_dir=str(console_dist)),
    )
    registry = Registry(config.data_dir / "registry")
    net = small_config((3, 16, 16))
    params = build_network(net, 1)
    weights = config.data_dir / "debug.melw"
    save_weights(params, net, weights)
    rng = np.random.default_rng(0)
    scores = np.concatenate([rng.uniform(0.6, 1, 20), rng.uniform(0, 0.4, 20)])
    labels = np.array([1] * 20 + [0] * 20)
    version = registry.register(weights, evaluate(scores, labels, test_digest="d"), "d")
    registry.transition(version.version_id, "production")

    samples = work / "samples"
    samples.mkdir(parents=True, exist_ok=True)
    for i in range(4):
        image = make_blob_image(np.random.default_rng(i), "malignant", 16)
        Image.fromarray(image.pixels).save(samples / f"sample{i}.png")

    uvicorn.run(create_app(config), host="127.0.0.1", port=port,
                log_level="warning")


if __name__ == "__main__":
    main()

# src/skillchain/learn/metrics.py
import logging
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

PPO_COLUMNS = ["step", "success_rate", "mean_return", "kl", "lr", "epsilon"]


def write_metrics(rows: List[dict], path: Optional[Union[str, Path]], columns: Optional[List[str]] = None
                  ) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=columns)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format="%.6g")
        logger.debug("metrics written to %s (%d rows)", path, len(df))
    return df

# Copyright 2026 The ARFNet Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Source-free domain adaptation with attention-enhanced features."""

from ._arfnet import (
    Config,
    ConfigError,
    ContractViolation,
    IoError,
    Model,
    NumericError,
    __version__,
    adapt,
    cli,
    gac_loss,
    gen_domain_pair,
    im_loss,
    load_checkpoint,
    pretrain,
)

__all__ = [
    "Config",
    "ConfigError",
    "ContractViolation",
    "IoError",
    "Model",
    "NumericError",
    "__version__",
    "adapt",
    "cli",
    "gac_loss",
    "gen_domain_pair",
    "im_loss",
    "load_checkpoint",
    "pretrain",
]

// Copyright 2026 The ETND Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace etnd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ETND_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  };

ETND_DEFINE_ERROR(InvalidConfig)
ETND_DEFINE_ERROR(GridTooSmall)
ETND_DEFINE_ERROR(SamplingExhausted)
ETND_DEFINE_ERROR(ShapeMismatch)
ETND_DEFINE_ERROR(LabelOutOfRange)
ETND_DEFINE_ERROR(NonFiniteLoss)
ETND_DEFINE_ERROR(DimensionMismatch)
ETND_DEFINE_ERROR(NoValidGallery)
ETND_DEFINE_ERROR(IoFailure)
ETND_DEFINE_ERROR(MalformedFilename)
ETND_DEFINE_ERROR(EmptyDataset)
ETND_DEFINE_ERROR(TooFewIdentities)
ETND_DEFINE_ERROR(CheckpointError)

#undef ETND_DEFINE_ERROR

}  // namespace etnd

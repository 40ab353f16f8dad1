// Copyright 2026 The cystseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cystseg {

enum class Errc {
  MissingFile,
  SchemaError,
  ShapeMismatch,
  UnsupportedFormat,
  CorruptImage,
  IoError,
  InvalidBand,
  InvalidConfig,
  TileTooSmall,
  NotEnoughGraders,
  FrameTooSmall,
  NoPositives,
  ShapeError,
  NotForwarded,
  Diverged,
  VersionMismatch,
  CorruptCheckpoint,
  MissingSpacing,
  MissingPrediction,
  EmptyGroup,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptImage: return "CorruptImage";
    case Errc::IoError: return "IoError";
    case Errc::InvalidBand: return "InvalidBand";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::TileTooSmall: return "TileTooSmall";
    case Errc::NotEnoughGraders: return "NotEnoughGraders";
    case Errc::FrameTooSmall: return "FrameTooSmall";
    case Errc::NoPositives: return "NoPositives";
    case Errc::ShapeError: return "ShapeError";
    case Errc::NotForwarded: return "NotForwarded";
    case Errc::Diverged: return "Diverged";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::MissingSpacing: return "MissingSpacing";
    case Errc::MissingPrediction: return "MissingPrediction";
    case Errc::EmptyGroup: return "EmptyGroup";
  }
  return "Unknown";
}

/// Input-validation failures (bad files, schemas, shapes) as opposed to
/// failures that happen while a valid job is running.
constexpr bool is_input_error(Errc code) noexcept {
  switch (code) {
    case Errc::MissingFile:
    case Errc::SchemaError:
    case Errc::ShapeMismatch:
    case Errc::UnsupportedFormat:
    case Errc::CorruptImage:
    case Errc::InvalidBand:
    case Errc::InvalidConfig:
    case Errc::TileTooSmall:
    case Errc::NotEnoughGraders:
    case Errc::FrameTooSmall:
    case Errc::NoPositives:
    case Errc::VersionMismatch:
    case Errc::CorruptCheckpoint:
    case Errc::MissingSpacing:
    case Errc::MissingPrediction:
    case Errc::EmptyGroup:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace cystseg

// Copyright 2026 The Storycast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace storycast {

// Coarse error families. The CLI maps each family to its own exit code.
enum class ErrorClass {
  kGeneral,
  kConfig,
  kBackend,
  kSchema,
  kAlignment,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define STORYCAST_DEFINE_ERROR(Name, Class)                                  \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
  }

// Precondition violations on arguments (negative durations, bad k, ...).
STORYCAST_DEFINE_ERROR(InvalidArgument, kGeneral);
STORYCAST_DEFINE_ERROR(IoError, kGeneral);
STORYCAST_DEFINE_ERROR(ConfigError, kConfig);

// script model
class MalformedTag : public Error {
 public:
  MalformedTag(const std::string& what, std::size_t offset)
      : Error(ErrorClass::kSchema, what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(const std::string& pointer, const std::string& what)
      : Error(ErrorClass::kSchema, pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class DanglingReference : public Error {
 public:
  DanglingReference(const std::string& pointer, const std::string& what)
      : Error(ErrorClass::kSchema, pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

// model selection
STORYCAST_DEFINE_ERROR(NoCapableModel, kBackend);
STORYCAST_DEFINE_ERROR(DuplicateModelId, kConfig);
STORYCAST_DEFINE_ERROR(DuplicateRank, kConfig);

// retrieval / prosody
STORYCAST_DEFINE_ERROR(DimensionMismatch, kSchema);
STORYCAST_DEFINE_ERROR(NoNeutralSample, kSchema);
STORYCAST_DEFINE_ERROR(SpaceMismatch, kSchema);
STORYCAST_DEFINE_ERROR(ZeroDirection, kSchema);
STORYCAST_DEFINE_ERROR(NotUnit, kSchema);

// cue compilation
STORYCAST_DEFINE_ERROR(NonMonotoneAlignment, kAlignment);
STORYCAST_DEFINE_ERROR(OffsetCountMismatch, kAlignment);
STORYCAST_DEFINE_ERROR(EmptyScope, kSchema);

class AnchorNotFound : public Error {
 public:
  AnchorNotFound(const std::string& word, int occurrence, const std::string& nearest,
                 const std::string& context = {})
      : Error(ErrorClass::kAlignment,
              (context.empty() ? std::string() : context + ": ") + "anchor '" + word + "' occurrence " +
                  std::to_string(occurrence) + " not found" +
                  (nearest.empty() ? std::string() : " (nearest: '" + nearest + "')")),
        word_(word),
        occurrence_(occurrence),
        nearest_(nearest) {}
  const std::string& word() const noexcept { return word_; }
  int occurrence() const noexcept { return occurrence_; }
  const std::string& nearest() const noexcept { return nearest_; }

 private:
  std::string word_;
  int occurrence_;
  std::string nearest_;
};

// audio
STORYCAST_DEFINE_ERROR(UnsupportedFormat, kSchema);
STORYCAST_DEFINE_ERROR(CorruptHeader, kSchema);
STORYCAST_DEFINE_ERROR(RateMismatch, kSchema);
STORYCAST_DEFINE_ERROR(MissingAsset, kSchema);

// backends
STORYCAST_DEFINE_ERROR(BackendUnavailable, kBackend);
STORYCAST_DEFINE_ERROR(ModeUnsupported, kBackend);

// evaluation
STORYCAST_DEFINE_ERROR(MalformedResponse, kBackend);
STORYCAST_DEFINE_ERROR(TemplateMissing, kConfig);
STORYCAST_DEFINE_ERROR(DegenerateVariance, kSchema);
STORYCAST_DEFINE_ERROR(RunFailure, kBackend);
STORYCAST_DEFINE_ERROR(MisalignedScores, kSchema);

#undef STORYCAST_DEFINE_ERROR

}  // namespace storycast

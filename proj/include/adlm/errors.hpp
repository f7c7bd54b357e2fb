// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace adlm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Token id or row index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// API misuse: violated precondition that is not about data content.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, corpora, test sets).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace adlm

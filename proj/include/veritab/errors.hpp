#pragma once

#include <stdexcept>
#include <string>

namespace veritab {

// Every failure mode the pipeline can report. Loaders and the interpreter
// throw Error with one of these codes; the CLI maps them to exit status 2.
enum class Err {
  // data loading
  RaggedRow,
  EmptyTable,
  DuplicateHeader,
  UnknownTableId,
  LabelOutOfRange,
  BadFormat,
  // program text
  SyntaxError,
  UnknownOperator,
  ArityMismatch,
  TypeMismatch,
  // execution
  UnknownColumn,
  EmptyViewAggregate,
  NonNumericColumn,
  KindMismatch,
  NonBooleanRoot,
  // encoding / graphs / training
  EmptyInput,
  SpanOutOfRange,
  CountMismatch,
  MissingTemplate,
  GraphNotEvaluated,
  EmptyDataset,
  EmptyCandidateSet,
  NoPositive,
  NoNegative,
};

const char* err_name(Err e);

struct Error : std::runtime_error {
  Err code;
  Error(Err c, const std::string& msg)
      : std::runtime_error(std::string(err_name(c)) + ": " + msg), code(c) {}
};

[[noreturn]] inline void fail(Err c, const std::string& msg) { throw Error(c, msg); }

}  // namespace veritab

#include "veritab/errors.hpp"

namespace veritab {

const char* err_name(Err e) {
  switch (e) {
    case Err::RaggedRow: return "RaggedRow";
    case Err::EmptyTable: return "EmptyTable";
    case Err::DuplicateHeader: return "DuplicateHeader";
    case Err::UnknownTableId: return "UnknownTableId";
    case Err::LabelOutOfRange: return "LabelOutOfRange";
    case Err::BadFormat: return "BadFormat";
    case Err::SyntaxError: return "SyntaxError";
    case Err::UnknownOperator: return "UnknownOperator";
    case Err::ArityMismatch: return "ArityMismatch";
    case Err::TypeMismatch: return "TypeMismatch";
    case Err::UnknownColumn: return "UnknownColumn";
    case Err::EmptyViewAggregate: return "EmptyViewAggregate";
    case Err::NonNumericColumn: return "NonNumericColumn";
    case Err::KindMismatch: return "KindMismatch";
    case Err::NonBooleanRoot: return "NonBooleanRoot";
    case Err::EmptyInput: return "EmptyInput";
    case Err::SpanOutOfRange: return "SpanOutOfRange";
    case Err::CountMismatch: return "CountMismatch";
    case Err::MissingTemplate: return "MissingTemplate";
    case Err::GraphNotEvaluated: return "GraphNotEvaluated";
    case Err::EmptyDataset: return "EmptyDataset";
    case Err::EmptyCandidateSet: return "EmptyCandidateSet";
    case Err::NoPositive: return "NoPositive";
    case Err::NoNegative: return "NoNegative";
  }
  return "Unknown";
}

}  // namespace veritab

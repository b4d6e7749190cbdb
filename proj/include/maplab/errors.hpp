#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maplab {

enum class ErrorKind {
    NotStochastic,
    NonIrreducible,
    ZeroMassState,
    InvalidSpec,
    MomentUndefined,
    GapAbsent,
    BranchCollision,
    SingularResolvent,
    UnsupportedInitial,
    DegenerateVariance,
    LatticeSpec,
    ZeroVariance,
    ConditionViolated,
    NoInteriorRoot,
    Config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
public:
    explicit KindedError(const std::string& what) : Error(K, what) {}
};

using NotStochastic = KindedError<ErrorKind::NotStochastic>;
using NonIrreducible = KindedError<ErrorKind::NonIrreducible>;
using ZeroMassState = KindedError<ErrorKind::ZeroMassState>;
using InvalidSpec = KindedError<ErrorKind::InvalidSpec>;
using MomentUndefined = KindedError<ErrorKind::MomentUndefined>;
using GapAbsent = KindedError<ErrorKind::GapAbsent>;
using BranchCollision = KindedError<ErrorKind::BranchCollision>;
using SingularResolvent = KindedError<ErrorKind::SingularResolvent>;
using UnsupportedInitial = KindedError<ErrorKind::UnsupportedInitial>;
using DegenerateVariance = KindedError<ErrorKind::DegenerateVariance>;
using LatticeSpec = KindedError<ErrorKind::LatticeSpec>;
using ZeroVariance = KindedError<ErrorKind::ZeroVariance>;
using NoInteriorRoot = KindedError<ErrorKind::NoInteriorRoot>;
using ConfigError = KindedError<ErrorKind::Config>;

// Carries which of the M-estimation conditions failed and for which parameter.
class ConditionViolated : public Error {
public:
    ConditionViolated(std::string condition, std::size_t theta_index, const std::string& what)
        : Error(ErrorKind::ConditionViolated, what),
          condition_(std::move(condition)),
          theta_index_(theta_index) {}
    const std::string& condition() const noexcept { return condition_; }
    std::size_t theta_index() const noexcept { return theta_index_; }

private:
    std::string condition_;
    std::size_t theta_index_;
};

}  // namespace maplab

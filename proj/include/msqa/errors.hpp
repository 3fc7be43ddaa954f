#pragma once

#include <stdexcept>
#include <string>

namespace msqa {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix that should lie on the SPD manifold has an eigenvalue <= 1e-12.
class NotSpd : public Error {
public:
    explicit NotSpd(const std::string& what) : Error("not SPD: " + what) {}
};

/// Weights are negative, sum to zero, or are not normalized.
class BadWeights : public Error {
public:
    explicit BadWeights(const std::string& what) : Error("bad weights: " + what) {}
};

class EmptyDataset : public Error {
public:
    explicit EmptyDataset(const std::string& what) : Error("empty dataset: " + what) {}
};

class NegativeRadius : public Error {
public:
    explicit NegativeRadius(const std::string& what) : Error("negative radius: " + what) {}
};

/// Invalid experiment or command-line configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

/// Numerical routine failed to converge; indicates a defect, not bad input.
class InternalError : public Error {
public:
    explicit InternalError(const std::string& what) : Error("internal: " + what) {}
};

}  // namespace msqa

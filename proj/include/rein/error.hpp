#pragma once
// Exception hierarchy shared by every rein module.

#include <stdexcept>
#include <string>

namespace rein {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// dialogue-core
class InvalidValue : public Error { using Error::Error; };
class OrderViolation : public Error { using Error::Error; };
class DoubleInjection : public Error { using Error::Error; };
class LateInjection : public Error { using Error::Error; };
class OutputWithoutInvocation : public Error { using Error::Error; };
class TurnClosed : public Error { using Error::Error; };

class MalformedArtifact : public Error {
public:
    MalformedArtifact(const std::string& what, std::size_t line, std::size_t offset = 0)
        : Error(what + " (line " + std::to_string(line) + ", offset " + std::to_string(offset) + ")"),
          line_(line), offset_(offset) {}
    std::size_t line() const { return line_; }
    std::size_t offset() const { return offset_; }

private:
    std::size_t line_;
    std::size_t offset_;
};

// toolkit-env
class DuplicateName : public Error { using Error::Error; };
class UnknownTool : public Error { using Error::Error; };
class GroundTruthFailed : public Error { using Error::Error; };

// llm-gateway. GatewayError covers everything an episode can survive by flagging.
class GatewayError : public Error { using Error::Error; };
class TransportError : public GatewayError { using GatewayError::GatewayError; };
class ProviderRefusal : public GatewayError { using GatewayError::GatewayError; };
class ScriptExhausted : public GatewayError { using GatewayError::GatewayError; };
class ScriptMismatch : public GatewayError { using GatewayError::GatewayError; };
class InvalidRequest : public Error { using Error::Error; };
class BudgetExceeded : public Error { using Error::Error; };

// statistics
class EmptyInput : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };

// curation / reporting / cli
class GenerationSchemaViolation : public Error { using Error::Error; };
class MissingRecords : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace rein

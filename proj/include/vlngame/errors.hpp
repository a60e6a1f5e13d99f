#pragma once

#include <stdexcept>
#include <string>

namespace vlngame {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VLNGAME_ERROR(Name)                                  \
    class Name : public Error {                              \
    public:                                                  \
        explicit Name(const std::string& what) : Error(what) {} \
    }

VLNGAME_ERROR(MalformedScene);
VLNGAME_ERROR(InvalidPlacement);
VLNGAME_ERROR(GoalBlocked);
VLNGAME_ERROR(Unreachable);
VLNGAME_ERROR(NoFrontier);
VLNGAME_ERROR(DegenerateInput);
VLNGAME_ERROR(OracleUnavailable);
VLNGAME_ERROR(MalformedResponse);
VLNGAME_ERROR(EmptyBatch);
VLNGAME_ERROR(ConfigError);

#undef VLNGAME_ERROR

}  // namespace vlngame

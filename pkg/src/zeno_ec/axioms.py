"""Event-calculus axioms in the surface language.

Each built-in predicate is resolved against these clauses after the
engine has chosen the right variant.  Literal order inside each body is
deliberate: the ``can_*`` guard comes first, then ``happens``, then the
effect rule itself, so that effect bodies are only explored for events
that actually occur.
"""

AXIOMS = """
% fluent changed continuously by an active control fluent
holdsAt(F2, T2) :-
    T1 .>. 0, T1 .<. T2,
    can_trajectory(F1, T1, F2, T2),
    can_initiates(E, F1, T1), happens(E, T1), initiates(E, F1, T1),
    trajectory(F1, T1, F2, T2),
    not_stoppedIn(T1, F1, T2).

% persistence from the initial state
holdsAt(F, T) :-
    T .>. 0,
    initiallyP(F),
    not_stoppedIn(0, F, T).

% persistence after an initiating event
holdsAt(F, T2) :-
    T1 .>. 0, T1 .<. T2,
    can_initiates(E, F, T1), happens(E, T1), initiates(E, F, T1),
    not_stoppedIn(T1, F, T2).

holdsAt_cf(F2, T2, F1) :-
    T1 .>. 0, T1 .<. T2,
    can_trajectory(F1, T1, F2, T2),
    can_initiates(E, F1, T1), happens(E, T1), initiates(E, F1, T1),
    trajectory(F1, T1, F2, T2),
    not_stoppedIn(T1, F1, T2).

holdsAt_cf_dur(F2, T2, F1, Dur) :-
    T2 .=. T1 + Dur, T1 .>. 0,
    can_trajectory(F1, T1, F2, T2),
    can_initiates(E, F1, T1), happens(E, T1), initiates(E, F1, T1),
    trajectory(F1, T1, F2, T2),
    not_stoppedIn(T1, F1, T2).

holdsAt_delay(F, T2, Dur) :-
    T2 .=. T1 + Dur, T1 .>. 0,
    can_initiates(E, F, T1), happens(E, T1), initiates(E, F, T1),
    not_stoppedIn(T1, F, T2).

holdsAt_event(F, T2, Dur, E) :-
    T2 .=. T1 + Dur, T1 .>. 0,
    can_initiates(E, F, T1), happens(E, T1), initiates(E, F, T1),
    not_stoppedIn(T1, F, T2).

% the fluent was terminated exactly Dur time units ago and stayed off
not_holdsAt_delay(F, T2, Dur) :-
    T2 .=. T1 + Dur, T1 .>. 0,
    can_terminates(E, F, T1), happens(E, T1), terminates(E, F, T1),
    not_startedIn(T1, F, T2).

stoppedIn(T1, F, T2) :-
    T1 .<. T, T .<. T2,
    can_terminates(E, F, T), happens(E, T), terminates(E, F, T).

stoppedIn_released(T1, F, T2) :-
    T1 .<. T, T .<. T2,
    can_releases(E, F, T), happens(E, T), releases(E, F, T).

startedIn(T1, F, T2) :-
    T1 .<. T, T .<. T2,
    can_initiates(E, F, T), happens(E, T), initiates(E, F, T).

startedIn_released(T1, F, T2) :-
    T1 .<. T, T .<. T2,
    can_releases(E, F, T), happens(E, T), releases(E, F, T).
"""

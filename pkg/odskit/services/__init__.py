"""Services: the attacker's query-counted view of the target model."""
